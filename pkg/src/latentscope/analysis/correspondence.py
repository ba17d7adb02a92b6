"""Same-id displacement statistics between two projections.

The optional alignment solves the similarity Procrustes problem
(translation + rotation + uniform scale, reflections excluded) mapping
side B onto side A by least squares before measuring displacements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..projection import Projection2D


class CorrespondenceError(ValueError):
    pass


@dataclass
class CorrespondenceReport:
    segment_ids: list[str]
    displacements: np.ndarray  # (n, 2), A - B'
    alignment: str
    mean_len: float
    median_len: float
    p95_len: float
    mean_direction_resultant: float

    def to_dict(self) -> dict:
        return {
            "segment_ids": self.segment_ids,
            "displacements": self.displacements.tolist(),
            "alignment": self.alignment,
            "summary": {
                "mean_len": self.mean_len,
                "median_len": self.median_len,
                "p95_len": self.p95_len,
                "mean_direction_resultant": self.mean_direction_resultant,
            },
        }


def similarity_procrustes(a: np.ndarray, b: np.ndarray):
    """Least-squares s, R, t (no reflection) so that s * b @ R.T + t ~ a."""
    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    a0 = a - mu_a
    b0 = b - mu_b
    cov = a0.T @ b0 / len(a)
    u, s, vt = np.linalg.svd(cov)
    d = np.ones(a.shape[1])
    if np.linalg.det(u @ vt) < 0:
        d[-1] = -1.0
    rot = u @ np.diag(d) @ vt
    var_b = float(np.sum(b0 * b0)) / len(b)
    scale = float(np.sum(s * d)) / var_b if var_b > 0 else 1.0
    shift = mu_a - scale * (rot @ mu_b)
    return scale, rot, shift


def correspondence(
    proj_a: Projection2D, proj_b: Projection2D, alignment: str = "none"
) -> CorrespondenceReport:
    """Displacement vectors A - B' for ids present in both projections."""
    if alignment not in ("none", "procrustes"):
        raise CorrespondenceError(f"unknown alignment {alignment!r}")
    shared = sorted(set(proj_a.segment_ids) & set(proj_b.segment_ids))
    if not shared:
        raise CorrespondenceError("no shared ids between projections")
    if alignment == "procrustes" and len(shared) < 3:
        raise CorrespondenceError("procrustes needs at least 3 shared ids")

    index_a = {sid: i for i, sid in enumerate(proj_a.segment_ids)}
    index_b = {sid: i for i, sid in enumerate(proj_b.segment_ids)}
    a = proj_a.coords[[index_a[sid] for sid in shared]]
    b = proj_b.coords[[index_b[sid] for sid in shared]]

    if alignment == "procrustes":
        scale, rot, shift = similarity_procrustes(a, b)
        b = scale * (b @ rot.T) + shift

    disp = a - b
    lengths = np.linalg.norm(disp, axis=1)
    units = np.zeros_like(disp)
    nonzero = lengths > 0
    units[nonzero] = disp[nonzero] / lengths[nonzero, None]
    resultant = float(np.linalg.norm(units.sum(axis=0)) / len(shared))
    return CorrespondenceReport(
        segment_ids=shared,
        displacements=disp,
        alignment=alignment,
        mean_len=float(lengths.mean()),
        median_len=float(np.median(lengths)),
        p95_len=float(np.percentile(lengths, 95)),
        mean_direction_resultant=resultant,
    )
