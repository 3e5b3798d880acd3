"""End-to-end recognition: extract, ratio-match, vote per object."""

from __future__ import annotations

from dataclasses import dataclass

from . import match, surf
from .featuredb import FeatureDb
from .imagecore import GrayImage

DEFAULT_RATIO = 0.7
DEFAULT_MIN_MATCHES = 4


@dataclass(frozen=True)
class Recognition:
    object_id: int | None
    object_name: str | None
    match_count: int
    total_query_features: int
    score: float


def recognize(
    db: FeatureDb,
    forest: match.KdForest,
    img: GrayImage,
    ratio: float = DEFAULT_RATIO,
    checks: int | None = match.DEFAULT_CHECKS,
    min_matches: int = DEFAULT_MIN_MATCHES,
    sign_filter: bool = True,
    threshold: float = surf.DEFAULT_THRESHOLD,
    use_linear: bool = False,
) -> Recognition:
    """Identify the database object best supported by descriptor matches.

    Each accepted ratio-test match votes for its record's object; ties are
    broken by lower mean match distance, then lower object id.  A winner
    with fewer than min_matches votes is reported as no match.
    """
    result = surf.extract(img, threshold)
    total = len(result.features)
    if total == 0:
        return Recognition(None, None, 0, 0, 0.0)

    queries = [(desc.values, pt.laplacian_sign) for pt, desc in result.features]
    matches = match.ratio_match(
        forest, queries, ratio=ratio, checks=checks, sign_filter=sign_filter,
        use_linear=use_linear,
    )
    votes: dict[int, int] = {}
    dist_sums: dict[int, float] = {}
    for m in matches:
        if m.best_index is None:
            continue
        object_id = int(
            db.records[int(forest.payload[m.best_index])].object_id
        )
        votes[object_id] = votes.get(object_id, 0) + 1
        dist_sums[object_id] = dist_sums.get(object_id, 0.0) + m.best_distance

    if not votes:
        return Recognition(None, None, 0, total, 0.0)
    winner = min(
        votes, key=lambda oid: (-votes[oid], dist_sums[oid] / votes[oid], oid)
    )
    count = votes[winner]
    if count < min_matches:
        return Recognition(None, None, count, total, 0.0)
    return Recognition(
        object_id=winner,
        object_name=db.object_by_id(winner).name,
        match_count=count,
        total_query_features=total,
        score=count / max(total, 1),
    )
