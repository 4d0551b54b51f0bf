"""Builds contrastive training tuples from relevance triples.

Per product: keep it if it has at least one MR or HR query; sample at most
`max_pos` positive queries targeting an HR:MR ratio of 2:1, filling from the
other class when one is exhausted. Per (product, positive): draw `n_neg`
negatives without replacement, from the product's IR and MR queries when the
positive is HR, from IR queries only when the positive is MR. Shortfalls are
filled with proxy negatives (an HR query of a random product in a different
aisle), and a draw that came out all-IR gets one negative replaced by a
proxy to promote diversity.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datagen.types import Catalog, LABEL_HR, LABEL_IR, LABEL_MR, RelevanceTriple
from .seeding import rng_for

logger = logging.getLogger(__name__)

TAG_IR = "IR"
TAG_MR = "MR"
TAG_PROXY = "PROXY"


@dataclass
class SamplerConfig:
    max_pos: int = 110
    hr_per_mr: float = 2.0
    n_neg: int = 10
    seed: int = 0


@dataclass
class PqcTuple:
    product_id: str
    positive_query_id: str
    positive_label: int
    negatives: list[tuple[str, str]] = field(default_factory=list)  # (query_id, tag)

    def negative_ids(self) -> list[str]:
        return [q for q, _ in self.negatives]

    def tags(self) -> list[str]:
        return [t for _, t in self.negatives]


def _positive_quota(n_hr: int, n_mr: int, cfg: SamplerConfig) -> tuple[int, int]:
    """Split the positive budget at the target ratio, spilling into the other
    class when one runs out."""
    budget = min(cfg.max_pos, n_hr + n_mr)
    want_hr = round(budget * cfg.hr_per_mr / (cfg.hr_per_mr + 1.0))
    take_hr = min(n_hr, want_hr)
    take_mr = min(n_mr, budget - take_hr)
    take_hr = min(n_hr, budget - take_mr)
    return take_hr, take_mr


def build_pqc_tuples(
    triples: list[RelevanceTriple],
    catalog: Catalog,
    cfg: SamplerConfig,
) -> list[PqcTuple]:
    by_product: dict[str, dict[int, list[str]]] = {}
    for t in triples:
        if t.product_id not in catalog.by_id:
            raise ValueError(f"triple references unknown product {t.product_id}")
        by_product.setdefault(t.product_id, {LABEL_IR: [], LABEL_MR: [], LABEL_HR: []})[t.label].append(
            t.query_id
        )

    # Proxy pool: HR queries per product, for products grouped by aisle.
    hr_products = sorted(pid for pid, labels in by_product.items() if labels[LABEL_HR])
    proxy_aisle = {pid: catalog.by_id[pid].aisle for pid in hr_products}
    aisles_with_hr = sorted({a for a in proxy_aisle.values()})

    tuples: list[PqcTuple] = []
    for pid in sorted(by_product):
        labels = by_product[pid]
        hr, mr, ir = labels[LABEL_HR], labels[LABEL_MR], labels[LABEL_IR]
        if not hr and not mr:
            continue
        rng = rng_for(cfg.seed, f"pqc/{pid}")
        take_hr, take_mr = _positive_quota(len(hr), len(mr), cfg)
        positives = [(q, LABEL_HR) for q in _draw(rng, hr, take_hr)]
        positives += [(q, LABEL_MR) for q in _draw(rng, mr, take_mr)]

        own_relevant = set(hr) | set(mr)
        mr_set = set(mr)
        product_aisle = catalog.by_id[pid].aisle
        for pos_qid, pos_label in positives:
            pool = ir + mr if pos_label == LABEL_HR else list(ir)
            pool = [q for q in pool if q != pos_qid]
            tags = {q: (TAG_MR if q in mr_set else TAG_IR) for q in pool}
            drawn = _draw(rng, pool, min(cfg.n_neg, len(pool)))
            negatives = [(q, tags[q]) for q in drawn]

            while len(negatives) < cfg.n_neg:
                negatives.append(
                    _proxy_negative(
                        rng, pid, catalog, hr_products, proxy_aisle, aisles_with_hr, by_product,
                        product_aisle, own_relevant, pos_qid,
                        taken={q for q, _ in negatives},
                    )
                )
            if len(drawn) == cfg.n_neg and all(tag == TAG_IR for _, tag in negatives):
                replace_at = int(rng.integers(0, cfg.n_neg))
                negatives[replace_at] = _proxy_negative(
                    rng, pid, catalog, hr_products, proxy_aisle, aisles_with_hr, by_product,
                    product_aisle, own_relevant, pos_qid,
                    taken={q for q, _ in negatives},
                )
            if all(tag == TAG_PROXY for _, tag in negatives):
                logger.info("product %s: tuple built entirely from proxy negatives", pid)
            tuples.append(PqcTuple(pid, pos_qid, pos_label, negatives))
    return tuples


def _draw(rng: np.random.Generator, pool: list[str], k: int) -> list[str]:
    if k == 0:
        return []
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in idx]


def _proxy_negative(
    rng: np.random.Generator,
    pid: str,
    catalog: Catalog,
    hr_products: list[str],
    proxy_aisle: dict[str, int],
    aisles_with_hr: list[int],
    by_product: dict[str, dict[int, list[str]]],
    product_aisle: int,
    own_relevant: set[str],
    pos_qid: str,
    taken: set[str],
) -> tuple[str, str]:
    """An HR query of a random product from a different aisle."""
    if all(a == product_aisle for a in aisles_with_hr):
        raise ValueError(f"product {pid}: cannot build proxy negatives, all HR queries share one aisle")
    for _ in range(200):
        src = hr_products[int(rng.integers(0, len(hr_products)))]
        if proxy_aisle[src] == product_aisle:
            continue
        pool = by_product[src][LABEL_HR]
        q = pool[int(rng.integers(0, len(pool)))]
        if q == pos_qid or q in own_relevant or q in taken:
            continue
        return (q, TAG_PROXY)
    raise ValueError(
        f"product {pid}: not enough distinct cross-aisle HR queries to fill proxy negatives"
    )


def sampling_report(tuples: list[PqcTuple]) -> dict:
    per_product = Counter(t.product_id for t in tuples)
    pos_labels = Counter(t.positive_label for t in tuples)
    tag_counts = Counter(tag for t in tuples for tag in t.tags())
    n_mr = pos_labels[LABEL_MR]
    return {
        "n_tuples": len(tuples),
        "n_products": len(per_product),
        "positives_per_product_mean": (len(tuples) / len(per_product)) if per_product else 0.0,
        "positive_hr": pos_labels[LABEL_HR],
        "positive_mr": n_mr,
        "hr_mr_ratio": (pos_labels[LABEL_HR] / n_mr) if n_mr else float("inf"),
        "negative_tags": dict(sorted(tag_counts.items())),
        "n_negatives": sum(tag_counts.values()),
    }


def write_tuples(tuples: list[PqcTuple], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in tuples:
            rec = {
                "product_id": t.product_id,
                "positive_query_id": t.positive_query_id,
                "positive_label": t.positive_label,
                "negatives": [{"query_id": q, "tag": tag} for q, tag in t.negatives],
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_tuples(path: Path) -> list[PqcTuple]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append(
                PqcTuple(
                    rec["product_id"],
                    rec["positive_query_id"],
                    rec["positive_label"],
                    [(n["query_id"], n["tag"]) for n in rec["negatives"]],
                )
            )
    return out
