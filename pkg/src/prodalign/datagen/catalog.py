"""Synthetic product catalog with planted aisle structure.

Each aisle owns a disjoint token sub-vocabulary and a Gaussian center in
image-feature space. A product's title mixes tokens from its aisle with a
few product-specific tokens from a separate pool, and its image features
are the aisle center plus product noise. That gives every later stage a
recoverable signal: aisle identity from both modalities, product identity
from the specific tokens and the image noise.
"""

from __future__ import annotations

import numpy as np

from ..seeding import rng_for
from .types import Catalog, Product

AISLE_VOCAB_SIZE = 40
SPECIFIC_POOL_SIZE = 1600
SPECIFIC_PER_PRODUCT = 4
IMAGE_NOISE_SCALE = 0.6


def generate_catalog(
    n_products: int,
    n_aisles: int,
    seed: int,
    d_img: int = 64,
) -> Catalog:
    if n_aisles < 2 or n_products < n_aisles:
        raise ValueError(f"need n_products >= n_aisles >= 2, got {n_products}, {n_aisles}")

    aisle_vocabs = [
        [f"t{a * AISLE_VOCAB_SIZE + j}" for j in range(AISLE_VOCAB_SIZE)] for a in range(n_aisles)
    ]
    base = n_aisles * AISLE_VOCAB_SIZE
    specific_pool = [f"t{base + j}" for j in range(SPECIFIC_POOL_SIZE)]

    rng = rng_for(seed, "catalog/centers")
    centers = rng.normal(0.0, 1.0, size=(n_aisles, d_img))

    # Deal specific tokens without reuse while the pool lasts; wrap after.
    deal = rng_for(seed, "catalog/specific").permutation(SPECIFIC_POOL_SIZE)

    products: list[Product] = []
    for i in range(n_products):
        prng = rng_for(seed, f"catalog/product/{i}")
        aisle = i % n_aisles
        n_aisle_tok = int(prng.integers(1, 9))
        n_spec_tok = int(prng.integers(1, SPECIFIC_PER_PRODUCT + 1))
        aisle_tokens = [aisle_vocabs[aisle][j] for j in prng.choice(AISLE_VOCAB_SIZE, size=n_aisle_tok, replace=False)]
        offsets = range(i * SPECIFIC_PER_PRODUCT, i * SPECIFIC_PER_PRODUCT + n_spec_tok)
        spec_tokens = [specific_pool[deal[o % SPECIFIC_POOL_SIZE]] for o in offsets]
        title = aisle_tokens + spec_tokens
        prng.shuffle(title)

        features = centers[aisle] + prng.normal(0.0, IMAGE_NOISE_SCALE, size=d_img)

        description = None
        if prng.random() < 0.68:
            description = [aisle_vocabs[aisle][j] for j in prng.choice(AISLE_VOCAB_SIZE, size=3, replace=False)]
        detail = None
        if prng.random() < 0.80:
            detail = [aisle_vocabs[aisle][j] for j in prng.choice(AISLE_VOCAB_SIZE, size=6, replace=True)]

        products.append(
            Product(
                product_id=f"p{i:05d}",
                title=title,
                image_features=features,
                aisle=aisle,
                description=description,
                detail=detail,
            )
        )

    return Catalog(products, aisle_vocabs, specific_pool, centers)
