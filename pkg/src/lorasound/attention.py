"""Server-side spectral band selection.

The assistance spectrogram is split into p*p patches, embedded, and pushed
through a small transformer. Per-block attention maps (head-averaged
softmax(Q K^T / sqrt(E/heads))) are multiplied newest-first into a rollout
map; its column sums, reshaped to p x p, score each patch, and the k
contiguous patch rows with the highest total become the spectral attention
mask sent back to the edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MaskValidationError, ShapeError
from .tensor import Tensor
from .wavelet import AssistSpectrogram
from .weights import WeightStore, seeded_tensor

__all__ = [
    "VitConfig",
    "AttentionMap",
    "ImportanceMatrix",
    "SpectralAttentionMask",
    "patchify",
    "embed_and_position",
    "attention_block",
    "attention_rollout",
    "importance",
    "select_band_window",
    "generate_mask",
    "analyze_spectrogram",
    "AssistAnalysis",
    "mask_random_bands",
    "triplet_loss",
    "mask_to_bytes",
    "mask_from_bytes",
    "bands_for_fraction",
    "init_vit_weights",
]


@dataclass(frozen=True)
class VitConfig:
    """Transformer geometry; patch_size is derived per assistance resolution."""

    p: int = 8
    e: int = 64
    blocks: int = 4
    heads: int = 4

    def __post_init__(self):
        if self.p < 1 or self.e < 1 or self.blocks < 1 or self.heads < 1:
            raise ShapeError("all transformer dimensions must be positive")
        if self.e % self.heads != 0:
            raise ShapeError(f"embedding dim {self.e} not divisible by "
                             f"{self.heads} heads")

    def patch_size(self, r_a: int) -> int:
        if r_a % self.p != 0:
            raise ShapeError(f"p={self.p} does not divide resolution {r_a}")
        return r_a // self.p


@dataclass(frozen=True)
class AttentionMap:
    """Row-stochastic p^2 x p^2 matrix of non-negative attention weights."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"attention map must be square, got {arr.shape}")
        if arr.min() < 0:
            raise ShapeError("attention map has negative entries")
        sums = arr.sum(axis=1, dtype=np.float64)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ShapeError("attention map rows do not sum to 1")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def tokens(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ImportanceMatrix:
    """p x p patch importances; total mass equals p^2 (column sums of a rollout)."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeError(f"importance matrix must be square, got {arr.shape}")
        total = arr.sum(dtype=np.float64)
        if abs(total - arr.shape[0] ** 2) > 1e-4 * max(1.0, arr.shape[0] ** 2):
            raise ShapeError(
                f"importance total {total} != p^2 = {arr.shape[0] ** 2}")
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1, dtype=np.float64)


@dataclass(frozen=True)
class SpectralAttentionMask:
    """Length-p binary vector with exactly k contiguous ones."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if not bits or any(b not in (0, 1) for b in bits):
            raise MaskValidationError("mask bits must be a non-empty 0/1 vector")
        ones = [i for i, b in enumerate(bits) if b]
        if not ones or ones[-1] - ones[0] + 1 != len(ones):
            raise MaskValidationError(
                f"mask must contain k >= 1 contiguous ones, got {bits}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_window(cls, p: int, window_start: int, k: int) -> "SpectralAttentionMask":
        if not 1 <= k <= p or not 0 <= window_start <= p - k:
            raise MaskValidationError(
                f"window [{window_start}, {window_start + k}) out of range for p={p}")
        return cls(tuple(1 if window_start <= i < window_start + k else 0
                         for i in range(p)))

    @property
    def k(self) -> int:
        return sum(self.bits)

    @property
    def window_start(self) -> int:
        return self.bits.index(1)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def patchify(s_a: AssistSpectrogram, cfg: VitConfig) -> Tensor:
    """Split an R_a x R_a grid into p^2 flattened patches.

    Patch index = patch_row * p + patch_col where patch_row spans frequency
    (grid rows) and patch_col spans time; each patch is flattened row-major.
    """
    ps = cfg.patch_size(s_a.dim)
    grid = s_a.grid
    patches = (grid.reshape(cfg.p, ps, cfg.p, ps)
               .transpose(0, 2, 1, 3)
               .reshape(cfg.p * cfg.p, ps * ps))
    return Tensor(patches)


def embed_and_position(patches: Tensor, weights: WeightStore,
                       cfg: VitConfig) -> Tensor:
    """Shared linear patch embedding plus the additive "pos_embed" tensor.

    The convolutional embedding with stride = kernel = patch size reduces to
    one linear map applied to every flattened patch, so that is how it is
    stored: ``patch_embed.ps{S}.weight`` of shape [E, S*S] per patch size S.
    """
    ps2 = patches.dims[1]
    ps = int(round(ps2 ** 0.5))
    w = weights.get(f"patch_embed.ps{ps}.weight")
    b = weights.get(f"patch_embed.ps{ps}.bias")
    if w.dims != (cfg.e, ps2):
        raise ShapeError(f"patch embedding weight {w.dims} incompatible with "
                         f"patches of {ps2} cells and E={cfg.e}")
    pos = weights.get("pos_embed")
    if pos.dims != (cfg.p * cfg.p, cfg.e):
        raise ShapeError(f"pos_embed must be [{cfg.p * cfg.p}, {cfg.e}], "
                         f"got {pos.dims}")
    out = patches.data @ w.data.T + b.data + pos.data
    return Tensor(out)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def attention_block(x: Tensor, weights: WeightStore, block_index: int,
                    cfg: VitConfig) -> tuple[Tensor, AttentionMap]:
    """One residual self-attention block.

    Scores are scaled by 1/sqrt(E/heads); the returned map is the arithmetic
    mean of the per-head softmax maps. Output is x + out_proj(A V), followed
    by a residual two-layer relu MLP only when mlp weights exist for the block.
    """
    tokens, e = x.dims
    if e != cfg.e:
        raise ShapeError(f"block input width {e} != configured E {cfg.e}")
    prefix = f"block{block_index}"
    wq = weights.get(f"{prefix}.q.weight")
    bq = weights.get(f"{prefix}.q.bias")
    wk = weights.get(f"{prefix}.k.weight")
    bk = weights.get(f"{prefix}.k.bias")
    wv = weights.get(f"{prefix}.v.weight")
    bv = weights.get(f"{prefix}.v.bias")
    wo = weights.get(f"{prefix}.out.weight")
    bo = weights.get(f"{prefix}.out.bias")
    q = x.data @ wq.data.T + bq.data
    k = x.data @ wk.data.T + bk.data
    v = x.data @ wv.data.T + bv.data
    e_head = cfg.e // cfg.heads
    scale = np.float32(1.0 / np.sqrt(e_head))
    head_maps = np.empty((cfg.heads, tokens, tokens), dtype=np.float32)
    attended = np.empty((tokens, cfg.e), dtype=np.float32)
    for h in range(cfg.heads):
        sl = slice(h * e_head, (h + 1) * e_head)
        scores = (q[:, sl] @ k[:, sl].T) * scale
        a = _softmax_rows(scores)
        head_maps[h] = a
        attended[:, sl] = a @ v[:, sl]
    out = x.data + (attended @ wo.data.T + bo.data)
    if f"{prefix}.mlp1.weight" in weights:
        w1 = weights.get(f"{prefix}.mlp1.weight")
        b1 = weights.get(f"{prefix}.mlp1.bias")
        w2 = weights.get(f"{prefix}.mlp2.weight")
        b2 = weights.get(f"{prefix}.mlp2.bias")
        hidden = np.maximum(out @ w1.data.T + b1.data, np.float32(0.0))
        out = out + (hidden @ w2.data.T + b2.data)
    return Tensor(out), AttentionMap(head_maps.mean(axis=0))


def attention_rollout(maps: list[AttentionMap]) -> AttentionMap:
    """Multiply per-block maps newest-first: rollout = A_n ... A_2 A_1.

    ``maps`` is in block order (A_1 first). No identity mixing is applied.
    The product is accumulated in float64 and stored as float32.
    """
    if not maps:
        raise ShapeError("attention_rollout needs at least one map")
    tokens = maps[0].tokens
    product = np.eye(tokens, dtype=np.float64)
    for m in maps:
        if m.tokens != tokens:
            raise ShapeError("attention maps have inconsistent sizes")
        product = m.matrix.astype(np.float64) @ product
    return AttentionMap(product.astype(np.float32))


def importance(rollout: AttentionMap, cfg: VitConfig) -> ImportanceMatrix:
    """Column sums of the rollout, reshaped row-major to p x p.

    Row i of the result corresponds to frequency patch-row i, matching the
    patchify ordering.
    """
    if rollout.tokens != cfg.p * cfg.p:
        raise ShapeError(f"rollout has {rollout.tokens} tokens, "
                         f"expected p^2 = {cfg.p * cfg.p}")
    col_sums = rollout.matrix.sum(axis=0, dtype=np.float64)
    return ImportanceMatrix(col_sums.reshape(cfg.p, cfg.p).astype(np.float32))


def select_band_window(imp: ImportanceMatrix, k: int) -> SpectralAttentionMask:
    """Pick the k contiguous patch rows with the highest importance sum.

    Ties resolve to the smallest window start.
    """
    p = imp.p
    if not 1 <= k <= p:
        raise MaskValidationError(f"k={k} out of range 1..{p}")
    row_sums = imp.row_sums()
    window_sums = np.array([row_sums[s:s + k].sum() for s in range(p - k + 1)])
    start = int(np.argmax(window_sums))
    return SpectralAttentionMask.from_window(p, start, k)


@dataclass(frozen=True)
class AssistAnalysis:
    mask: SpectralAttentionMask
    importance: ImportanceMatrix
    rollout: AttentionMap
    block_maps: tuple[AttentionMap, ...]


def analyze_spectrogram(s_a: AssistSpectrogram, weights: WeightStore,
                        cfg: VitConfig, k: int) -> AssistAnalysis:
    """Full pipeline with intermediates kept for inspection and CSV dumps."""
    x = embed_and_position(patchify(s_a, cfg), weights, cfg)
    maps = []
    for i in range(cfg.blocks):
        x, amap = attention_block(x, weights, i, cfg)
        maps.append(amap)
    rollout = attention_rollout(maps)
    imp = importance(rollout, cfg)
    return AssistAnalysis(select_band_window(imp, k), imp, rollout, tuple(maps))


def generate_mask(s_a: AssistSpectrogram, weights: WeightStore,
                  cfg: VitConfig, k: int) -> SpectralAttentionMask:
    """Deterministic mask for a spectrogram under fixed weights."""
    return analyze_spectrogram(s_a, weights, cfg, k).mask


def mask_random_bands(s_a: AssistSpectrogram, band_count: int,
                      seed: int) -> AssistSpectrogram:
    """Zero band_count distinct rows chosen by a seeded PCG64 generator.

    Used to build attracting/contrasting pairs for contrastive objectives.
    """
    if not 0 <= band_count <= s_a.dim:
        raise ShapeError(f"band_count {band_count} out of range 0..{s_a.dim}")
    grid = s_a.grid.copy()
    if band_count:
        rng = np.random.default_rng(seed)
        rows = rng.choice(s_a.dim, size=band_count, replace=False)
        grid[rows] = 0.0
    return AssistSpectrogram(grid)


def triplet_loss(anchor: Tensor, positive: Tensor, negative: Tensor,
                 margin: float) -> float:
    """max(0, ||a-p||^2 - ||a-n||^2 + margin) with squared euclidean distances."""
    if not (anchor.dims == positive.dims == negative.dims):
        raise ShapeError("triplet inputs must share dims")
    d_pos = float(((anchor.data - positive.data) ** 2).sum(dtype=np.float64))
    d_neg = float(((anchor.data - negative.data) ** 2).sum(dtype=np.float64))
    return max(0.0, d_pos - d_neg + margin)


def mask_to_bytes(mask: SpectralAttentionMask) -> bytes:
    """Pack to ceil(p/8) bytes, MSB first: bit i = patch-row i selected."""
    p = len(mask.bits)
    out = bytearray((p + 7) // 8)
    for i, bit in enumerate(mask.bits):
        if bit:
            out[i // 8] |= 0x80 >> (i % 8)
    return bytes(out)


def mask_from_bytes(data: bytes, p: int) -> SpectralAttentionMask:
    if len(data) != (p + 7) // 8:
        raise MaskValidationError(
            f"mask payload must be {(p + 7) // 8} bytes for p={p}, got {len(data)}")
    bits = tuple((data[i // 8] >> (7 - i % 8)) & 1 for i in range(p))
    return SpectralAttentionMask(bits)


def bands_for_fraction(fraction: float, p: int) -> int:
    """Convert a selected-region fraction into a contiguous patch-row count."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    return min(p, max(1, round(fraction * p)))


def init_vit_weights(cfg: VitConfig, patch_sizes: list[int], seed: int,
                     mlp: bool = False, mlp_hidden: int | None = None
                     ) -> WeightStore:
    """Reproducible random transformer weights covering the given patch sizes."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for ps in sorted(set(patch_sizes)):
        scale = 1.0 / np.sqrt(ps * ps)
        store.add(f"patch_embed.ps{ps}.weight",
                  seeded_tensor(rng, (cfg.e, ps * ps), scale))
        store.add(f"patch_embed.ps{ps}.bias", Tensor.zeros(cfg.e))
    store.add("pos_embed", seeded_tensor(rng, (cfg.p * cfg.p, cfg.e), 0.02))
    proj_scale = 1.0 / np.sqrt(cfg.e)
    for i in range(cfg.blocks):
        for name in ("q", "k", "v", "out"):
            store.add(f"block{i}.{name}.weight",
                      seeded_tensor(rng, (cfg.e, cfg.e), proj_scale))
            store.add(f"block{i}.{name}.bias", Tensor.zeros(cfg.e))
        if mlp:
            hidden = mlp_hidden or 2 * cfg.e
            store.add(f"block{i}.mlp1.weight",
                      seeded_tensor(rng, (hidden, cfg.e), proj_scale))
            store.add(f"block{i}.mlp1.bias", Tensor.zeros(hidden))
            store.add(f"block{i}.mlp2.weight",
                      seeded_tensor(rng, (cfg.e, hidden), 1.0 / np.sqrt(hidden)))
            store.add(f"block{i}.mlp2.bias", Tensor.zeros(cfg.e))
    return store
