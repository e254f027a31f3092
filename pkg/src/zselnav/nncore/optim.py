"""Named parameter collections and the Adam optimizer."""

from __future__ import annotations

import zlib

import numpy as np

from .tensor import Tensor


class TrainingDiverged(RuntimeError):
    """Raised when gradients or losses go non-finite; carries the step index."""


class ParameterSet:
    """Ordered name -> Tensor map with a freeze mask.

    Frozen parameters receive zero updates but may still accumulate grads.
    Iteration order is sorted by name so every consumer is deterministic.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.frozen: set[str] = set()

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = data if isinstance(data, Tensor) else Tensor(np.asarray(data), requires_grad=True)
        t.requires_grad = True
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def n_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def freeze(self, *prefixes: str):
        for name in self.names():
            if any(name == p or name.startswith(p + ".") or name.startswith(p)
                   for p in prefixes):
                self.frozen.add(name)

    def unfreeze_all(self):
        self.frozen.clear()

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None

    def checksum(self) -> int:
        """CRC32 over names and exact payload bytes; freeze-violation probe."""
        crc = 0
        for name, t in self.items():
            crc = zlib.crc32(name.encode(), crc)
            crc = zlib.crc32(np.ascontiguousarray(t.data).tobytes(), crc)
        return crc

    def copy_values_from(self, other: "ParameterSet"):
        for name, t in self.items():
            src = other[name]
            if src.shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {src.shape} vs {t.shape}")
            t.data = src.data.copy()

    def global_grad_norm(self) -> float:
        total = 0.0
        for name, t in self.items():
            if t.grad is not None and name not in self.frozen:
                total += float((t.grad.astype(np.float64) ** 2).sum())
        return float(np.sqrt(total))

    def clip_grad_norm(self, max_norm: float) -> float:
        norm = self.global_grad_norm()
        if norm > max_norm and norm > 0.0:
            scale = np.float32(max_norm / norm)
            for name, t in self.items():
                if t.grad is not None and name not in self.frozen:
                    t.grad *= scale
        return norm


class Adam:
    """Adam with bias correction. Skips frozen names entirely; raises
    TrainingDiverged on non-finite gradients, naming the step."""

    def __init__(self, params: ParameterSet, lr: float = 2.5e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            if name in self.params.frozen or p.grad is None:
                continue
            g = p.grad
            if not np.isfinite(g).all():
                raise TrainingDiverged(f"non-finite gradient in {name!r} at step {self.t}")
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"__opt__.t": np.array([self.t], dtype=np.int64)}
        for name in sorted(self.m):
            out[f"__opt__.m.{name}"] = self.m[name]
            out[f"__opt__.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]):
        self.t = int(arrays.get("__opt__.t", np.array([0]))[0])
        self.m.clear()
        self.v.clear()
        for key, arr in arrays.items():
            if key.startswith("__opt__.m."):
                self.m[key[len("__opt__.m."):]] = arr.copy()
            elif key.startswith("__opt__.v."):
                self.v[key[len("__opt__.v."):]] = arr.copy()
