"""The two model families.

Server model: a two-hidden-layer tanh MLP encoder (input dim d -> width k)
plus an affine classifier over all base classes.  It is the only model that
travels to the server for aggregation.

Client model: a single-head scaled dot-product attention block over the
episode's support set (residual connection, then per-row affine + tanh),
plus an affine N-way head.  It consumes server representations, never raw
features, and stays on its client.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamVector
from .tensor import ShapeError, Tensor


@dataclass(frozen=True)
class ServerArch:
    in_dim: int
    width: int
    num_classes: int  # number of base classes


@dataclass(frozen=True)
class ClientArch:
    width: int
    n_way: int


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_server_params(arch: ServerArch, rng: np.random.Generator) -> ParamVector:
    d, k, c = arch.in_dim, arch.width, arch.num_classes
    if min(d, k, c) <= 0:
        raise ValueError(f"non-positive dimension in {arch}")
    return ParamVector(
        [
            ("enc1.w", Tensor(_xavier(rng, d, k))),
            ("enc1.b", Tensor(np.zeros(k))),
            ("enc2.w", Tensor(_xavier(rng, k, k))),
            ("enc2.b", Tensor(np.zeros(k))),
            ("cls.w", Tensor(_xavier(rng, k, c))),
            ("cls.b", Tensor(np.zeros(c))),
        ]
    )


def init_client_params(arch: ClientArch, rng: np.random.Generator) -> ParamVector:
    k, n = arch.width, arch.n_way
    if min(k, n) <= 0:
        raise ValueError(f"non-positive dimension in {arch}")
    return ParamVector(
        [
            ("attn.wq", Tensor(_xavier(rng, k, k))),
            ("attn.wk", Tensor(_xavier(rng, k, k))),
            ("attn.wv", Tensor(_xavier(rng, k, k))),
            ("mix.w", Tensor(_xavier(rng, k, k))),
            ("mix.b", Tensor(np.zeros(k))),
            ("cls.w", Tensor(_xavier(rng, k, n))),
            ("cls.b", Tensor(np.zeros(n))),
        ]
    )


def server_forward(params: ParamVector, x: np.ndarray) -> tuple[Tensor, Tensor]:
    """Return (representations, base-class logits) for a feature batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params["enc1.w"].values.shape[0]:
        raise ShapeError(
            f"server_forward: batch {x.shape} vs input dim "
            f"{params['enc1.w'].values.shape[0]}"
        )
    h = Tensor(x).matmul(params["enc1.w"]).add_rowvec(params["enc1.b"]).tanh()
    h = h.matmul(params["enc2.w"]).add_rowvec(params["enc2.b"]).tanh()
    logits = h.matmul(params["cls.w"]).add_rowvec(params["cls.b"])
    return h, logits


def _attention_block(
    params: ParamVector, queries: Tensor, keys: Tensor, vals: Tensor
) -> Tensor:
    k = params["attn.wq"].values.shape[0]
    q = queries.matmul(params["attn.wq"])
    weights = q.scores(keys).mul_const(1.0 / np.sqrt(k)).softmax_rows()
    mixed = queries + weights.attend(vals)
    return mixed.matmul(params["mix.w"]).add_rowvec(params["mix.b"]).tanh()


def client_forward(
    params: ParamVector,
    h_support: np.ndarray,
    h_query: np.ndarray | None = None,
) -> tuple[Tensor, Tensor | None, Tensor, Tensor | None]:
    """Encode support (self-attention) and query (attention over support) rows.

    Query rows attend over the support set only, so each query output is a
    function of its own row, the support set and the parameters.  Inputs are
    server representations and are treated as constants.

    Returns (support reprs, query reprs, support logits, query logits); the
    query entries are None when ``h_query`` is None.
    """
    hs = np.asarray(h_support, dtype=np.float64)
    if hs.ndim != 2 or hs.shape[0] == 0:
        raise ShapeError(f"client_forward: empty or non-matrix support {hs.shape}")
    if hs.shape[1] != params["attn.wq"].values.shape[0]:
        raise ShapeError(
            f"client_forward: width {hs.shape[1]} vs "
            f"{params['attn.wq'].values.shape[0]}"
        )
    support = Tensor(hs)
    keys = support.matmul(params["attn.wk"])
    vals = support.matmul(params["attn.wv"])
    enc_s = _attention_block(params, support, keys, vals)
    logits_s = enc_s.matmul(params["cls.w"]).add_rowvec(params["cls.b"])
    if h_query is None:
        return enc_s, None, logits_s, None
    hq = np.asarray(h_query, dtype=np.float64)
    if hq.ndim != 2 or hq.shape[1] != hs.shape[1]:
        raise ShapeError(f"client_forward: query {hq.shape} vs support {hs.shape}")
    enc_q = _attention_block(params, Tensor(hq), keys, vals)
    logits_q = enc_q.matmul(params["cls.w"]).add_rowvec(params["cls.b"])
    return enc_s, enc_q, logits_s, logits_q
