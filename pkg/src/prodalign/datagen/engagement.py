"""Synthetic click/purchase logs with a known ground-truth click model.

Click probability is sigmoid(intercept + alpha * relevance + beta * aisle
affinity + gamma * (position - 1) + noise). Users carry a persistent
preferred aisle; about 60% of them also get a purchase history drawn from
that aisle, which is what makes history pooling informative for the ranker.
The coefficients are returned so runs can record them in metadata.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..seeding import rng_for
from .types import Catalog, EngagementEvent, Query, RelevanceTriple


@dataclass(frozen=True)
class EngagementParams:
    intercept: float = -2.0
    alpha_relevance: float = 1.6
    beta_affinity: float = 1.3
    gamma_position: float = -0.10
    noise_scale: float = 0.25
    n_positions: int = 8
    history_fraction: float = 0.6
    history_min: int = 2
    history_max: int = 8

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EngagementLog:
    """Events plus the generator's ground truth, kept for oracle checks."""

    events: list[EngagementEvent]
    params: EngagementParams
    click_probs: np.ndarray
    preferred_aisle: dict[str, int]


def click_logit(
    params: EngagementParams,
    relevance: int,
    affinity: float,
    position: int,
    noise: float,
) -> float:
    return (
        params.intercept
        + params.alpha_relevance * relevance
        + params.beta_affinity * affinity
        + params.gamma_position * (position - 1)
        + noise
    )


def generate_engagements(
    catalog: Catalog,
    queries: list[Query],
    triples: list[RelevanceTriple],
    n_users: int,
    n_events: int,
    seed: int,
    params: EngagementParams | None = None,
) -> EngagementLog:
    if params is None:
        params = EngagementParams()
    by_aisle: dict[int, list[str]] = {}
    for p in catalog.products:
        by_aisle.setdefault(p.aisle, []).append(p.product_id)

    urng = rng_for(seed, "engagement/users")
    preferred = urng.integers(0, catalog.n_aisles, size=n_users)
    has_history = urng.random(n_users) < params.history_fraction
    histories: list[list[str]] = []
    for u in range(n_users):
        if not has_history[u]:
            histories.append([])
            continue
        pool = by_aisle[int(preferred[u])]
        n = int(urng.integers(params.history_min, params.history_max + 1))
        picks = urng.choice(len(pool), size=min(n, len(pool)), replace=False)
        histories.append([pool[i] for i in sorted(picks)])

    # Query popularity drives both sampling weight and the frequency feature.
    qrng = rng_for(seed, "engagement/queries")
    popularity = qrng.zipf(1.6, size=len(queries)).astype(np.float64)
    popularity = np.minimum(popularity, 50.0)
    weights = popularity / popularity.sum()

    erng = rng_for(seed, "engagement/events")
    triple_idx_by_query: dict[str, list[int]] = {}
    for i, t in enumerate(triples):
        triple_idx_by_query.setdefault(t.query_id, []).append(i)
    query_ids = [q.query_id for q in queries]

    events: list[EngagementEvent] = []
    click_probs = np.zeros(n_events)
    past_clicks = np.zeros(n_users, dtype=np.int64)
    qi_draws = erng.choice(len(queries), size=n_events, p=weights)
    user_draws = erng.integers(0, n_users, size=n_events)
    pos_draws = erng.integers(1, params.n_positions + 1, size=n_events)
    noise_draws = erng.normal(0.0, params.noise_scale, size=n_events)
    for ts in range(n_events):
        qi = int(qi_draws[ts])
        u = int(user_draws[ts])
        cand_idxs = triple_idx_by_query[query_ids[qi]]
        t = triples[cand_idxs[int(erng.integers(0, len(cand_idxs)))]]
        product = catalog.by_id[t.product_id]
        affinity = 1.0 if product.aisle == int(preferred[u]) else 0.0
        logit = click_logit(params, t.label, affinity, int(pos_draws[ts]), float(noise_draws[ts]))
        p_click = 1.0 / (1.0 + np.exp(-logit))
        click = int(erng.random() < p_click)
        click_probs[ts] = p_click
        events.append(
            EngagementEvent(
                user_id=f"u{u:05d}",
                query_id=t.query_id,
                product_id=t.product_id,
                click=click,
                timestamp=ts,
                position=int(pos_draws[ts]),
                user_past_clicks=int(past_clicks[u]),
                query_freq=float(popularity[qi]),
                purchase_history=list(histories[u]),
            )
        )
        past_clicks[u] += click
    preferred_map = {f"u{u:05d}": int(preferred[u]) for u in range(n_users)}
    return EngagementLog(events, params, click_probs, preferred_map)
