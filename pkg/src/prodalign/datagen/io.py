"""Serialization for catalogs, queries, triples, and engagement logs.

Catalog and engagement logs are JSON Lines (one record per line, UTF-8);
relevance triples are CSV with header query_id,product_id,label.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .types import Catalog, EngagementEvent, Product, Query, RelevanceTriple


def write_catalog(catalog: Catalog, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "kind": "catalog_header",
            "aisle_vocabs": catalog.aisle_vocabs,
            "specific_pool": catalog.specific_pool,
            "aisle_centers": [[float(x) for x in row] for row in catalog.aisle_centers],
        }
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for p in catalog.products:
            rec = {
                "kind": "product",
                "product_id": p.product_id,
                "title": p.title,
                "image_features": [float(x) for x in p.image_features],
                "aisle": p.aisle,
                "description": p.description,
                "detail": p.detail,
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_catalog(path: Path) -> Catalog:
    products: list[Product] = []
    header = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            if rec["kind"] == "catalog_header":
                header = rec
            else:
                products.append(
                    Product(
                        product_id=rec["product_id"],
                        title=rec["title"],
                        image_features=np.array(rec["image_features"], dtype=np.float64),
                        aisle=rec["aisle"],
                        description=rec["description"],
                        detail=rec["detail"],
                    )
                )
    if header is None:
        raise ValueError(f"{path}: missing catalog header record")
    return Catalog(
        products,
        header["aisle_vocabs"],
        header["specific_pool"],
        np.array(header["aisle_centers"], dtype=np.float64),
    )


def write_queries(queries: list[Query], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in queries:
            f.write(json.dumps({"query_id": q.query_id, "text": q.text}, sort_keys=True) + "\n")


def read_queries(path: Path) -> list[Query]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append(Query(query_id=rec["query_id"], text=rec["text"]))
    return out


def write_triples(triples: list[RelevanceTriple], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["query_id", "product_id", "label"])
        for t in triples:
            w.writerow([t.query_id, t.product_id, t.label])


def read_triples(path: Path) -> list[RelevanceTriple]:
    out = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            out.append(RelevanceTriple(row["query_id"], row["product_id"], int(row["label"])))
    return out


def write_engagements(events: list[EngagementEvent], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for e in events:
            rec = {
                "user_id": e.user_id,
                "query_id": e.query_id,
                "product_id": e.product_id,
                "click": e.click,
                "timestamp": e.timestamp,
                "position": e.position,
                "user_past_clicks": e.user_past_clicks,
                "query_freq": e.query_freq,
                "purchase_history": e.purchase_history,
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_engagements(path: Path) -> list[EngagementEvent]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            out.append(EngagementEvent(**rec))
    return out
