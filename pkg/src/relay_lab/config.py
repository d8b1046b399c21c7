"""Run configuration: hyperparameter columns, key=value config files,
resolved-config emission, and run-directory locking."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .training import TrainHyper, code_version


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class HyperColumn:
    epochs: int
    batch_size: int
    lr: float
    task_weights: tuple[float, float, float]  # ARI, ED, LIS
    alignment_weight: float

    def hyper(self, divisor: float = 1.0, seed: int = 0) -> TrainHyper:
        """Desk-scaled hyperparameters: epochs shrink by the divisor, batch
        size is preserved."""
        weights = dict(zip(("ARI", "ED", "LIS"), self.task_weights))
        return TrainHyper(
            epochs=max(1, round(self.epochs / divisor)),
            batch_size=self.batch_size,
            lr=self.lr,
            task_weights=weights,
            seed=seed,
        )


# Training recipe columns (per-model hyperparameters).
TRAIN_COLUMNS: dict[str, HyperColumn] = {
    "looped-aligned": HyperColumn(500, 512, 5e-4, (1.0, 1.0, 1.0), 1.0),
    "ar-cot": HyperColumn(500, 512, 5e-4, (1.0, 10.0, 5.0), 0.0),
    "vanilla-looped": HyperColumn(500, 512, 1e-3, (1.0, 10.0, 5.0), 0.0),
}

# Fine-tuning recipe columns.
FINETUNE_COLUMNS: dict[str, HyperColumn] = {
    "relay": HyperColumn(500, 512, 1e-4, (1.0, 10.0, 5.0), 0.0),
    "self": HyperColumn(100, 512, 5e-5, (1.0, 1.0, 1.0), 0.0),
}


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """key=value lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {line_no}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"{path}: line {line_no}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def write_resolved_config(values: dict, path: str | Path) -> None:
    lines = [f"# {code_version()}"]
    for key in sorted(values):
        lines.append(f"{key}={values[key]}")
    Path(path).write_text("\n".join(lines) + "\n")


def apply_thread_cap() -> int:
    """Honor the RELAY_LAB_THREADS cap; returns the thread count in use."""
    import torch

    cap = os.environ.get("RELAY_LAB_THREADS")
    if cap:
        try:
            n = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"RELAY_LAB_THREADS must be an integer, got {cap!r}") from None
        torch.set_num_threads(n)
    return torch.get_num_threads()


class RunLock:
    """Single-writer lock on a run directory (pid file, O_EXCL)."""

    def __init__(self, run_dir: str | Path) -> None:
        self.path = Path(run_dir) / ".lock"
        self.acquired = False

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = self.path.read_text().strip()
            if pid.isdigit() and _pid_alive(int(pid)):
                raise RuntimeError(
                    f"run directory {self.path.parent} is locked by live process {pid}"
                ) from None
            print(f"warning: replacing stale lock (pid {pid or '?'})")
            self.path.unlink()
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        self.acquired = True
        return self

    def __exit__(self, *exc) -> None:
        if self.acquired and self.path.exists():
            self.path.unlink()


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
