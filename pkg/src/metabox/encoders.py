"""Encoders mapping categorical components to quantitative vectors.

Every encoder guarantees exact pre-image recovery: decode(encode(xq)) == xq
for any categorical component in the set decreed by the meta component.
Decoding also accepts relaxed vectors (argmax for one-hot blocks, rounding
and clamping for index encodings) so acquisition searches can hand back
slightly off-lattice values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Domain, MetaComponent, VariableType, round_half_away
from .errors import DecreeViolationError, ShapeError

KINDS = ("identity", "one-hot", "ordinal-index")


@dataclass(frozen=True)
class Encoder:
    """Encode acting categorical variables, declaration order.

    identity: 1-based category index passthrough (no real encoding; pairs
    with matrix-mode kernels).  one-hot: nominal variables become unit basis
    vectors, ordinal variables keep their index so the order survives.
    ordinal-index: every variable becomes its level index as a float.
    """

    domain: Domain
    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShapeError(f"unknown encoder kind {self.kind!r}; expected one of {KINDS}")

    def width(self, var_id: str) -> int:
        spec = self.domain.spec(var_id)
        if self.kind == "one-hot" and spec.type == VariableType.NOMINAL:
            return spec.scope.size
        return 1

    def length(self, xm: MetaComponent) -> int:
        return sum(self.width(vid) for vid in self.domain.acting_index_set(xm, "categorical"))

    def encode_variable(self, var_id: str, index: int) -> np.ndarray:
        spec = self.domain.spec(var_id)
        if self.kind == "one-hot" and spec.type == VariableType.NOMINAL:
            block = np.zeros(spec.scope.size)
            block[index - 1] = 1.0
            return block
        return np.array([float(index)])

    def encode(self, xq: dict, xm: MetaComponent) -> np.ndarray:
        ids = self.domain.acting_index_set(xm, "categorical")
        extra = set(xq) - set(ids)
        if extra:
            raise DecreeViolationError(
                f"component contains nonacting variables {sorted(extra)}")
        missing = set(ids) - set(xq)
        if missing:
            raise DecreeViolationError(
                f"component is missing acting variables {sorted(missing)}")
        if not ids:
            return np.empty(0)
        return np.concatenate([self.encode_variable(vid, xq[vid]) for vid in ids])

    def decode(self, vector, xm: MetaComponent) -> dict:
        ids = self.domain.acting_index_set(xm, "categorical")
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.length(xm),):
            raise ShapeError(
                f"encoded vector has length {vector.shape}, expected ({self.length(xm)},)")
        component = {}
        offset = 0
        for vid in ids:
            spec = self.domain.spec(vid)
            w = self.width(vid)
            block = vector[offset:offset + w]
            offset += w
            if w > 1:
                component[vid] = int(np.argmax(block)) + 1  # ties resolve to the lowest index
            else:
                component[vid] = min(max(round_half_away(float(block[0])), 1),
                                     spec.scope.size)
        return component
