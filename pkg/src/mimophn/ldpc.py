"""Regular LDPC code construction, encoding, and sum-product decoding.

The decoder exchanges probabilities at its interface (P(bit = 1) per code
bit) and runs flooding sum-product in the log-likelihood-ratio domain
internally. Inputs of exactly 0 or 1 are clamped to [CLAMP_EPS, 1-CLAMP_EPS]
so extrinsic extraction never divides by zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError

# Probability clamp shared with the detector message passing.
CLAMP_EPS = 1e-12
# |LLR| cap keeping tanh/arctanh away from saturation; exceeds ln((1-eps)/eps).
_LLR_MAX = 34.0


@dataclass(frozen=True)
class BitBeliefs:
    """Per-bit P(bit = 1) vector with its role in the exchange."""

    prob_one: np.ndarray
    role: str  # "channel-prior" | "a-posteriori" | "extrinsic"


@dataclass
class LdpcCode:
    """Binary LDPC code described by its Tanner graph.

    check_adj / var_adj are padded adjacency tables (-1 padding) with boolean
    validity masks, so irregular graphs (used by small test codes) decode
    through the same vectorized path as the regular production codes.

    Encoding uses the reduced row echelon form of the parity matrix: info
    bits occupy the non-pivot columns (the systematic positions) and each
    pivot column is the GF(2) sum of a fixed subset of info bits.
    """

    block_len: int
    num_checks: int
    check_adj: np.ndarray   # (num_checks, max_check_deg) int, -1 padded
    check_mask: np.ndarray  # (num_checks, max_check_deg) bool
    var_adj: np.ndarray     # (block_len, max_var_deg) int, -1 padded
    var_mask: np.ndarray    # (block_len, max_var_deg) bool
    pivot_cols: np.ndarray      # parity positions, one per independent check
    systematic_cols: np.ndarray  # info positions (non-pivot columns)
    encode_matrix: np.ndarray    # (rank, info_len) uint8: parity = E @ info mod 2
    rank: int
    num_four_cycle_pairs: int
    seed: int | None = None
    # edge bookkeeping for the decoder (built in __post_init__)
    _var_edge_ids: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # Flat edge id = check_row * max_check_deg + slot; map each variable's
        # incident edges to those ids once.
        m, dc = self.check_adj.shape
        edge_of = [[] for _ in range(self.block_len)]
        rows, slots = np.nonzero(self.check_mask)
        for r, s in zip(rows, slots):
            edge_of[self.check_adj[r, s]].append(r * dc + s)
        ids = np.zeros(self.var_adj.shape, dtype=np.int64)
        for v in range(self.block_len):
            deg = int(self.var_mask[v].sum())
            if deg != len(edge_of[v]):
                raise ConstructionError("inconsistent adjacency tables")
            ids[v, :deg] = edge_of[v]
        object.__setattr__(self, "_var_edge_ids", ids)

    @property
    def info_len(self) -> int:
        return self.block_len - self.rank

    @property
    def rate(self) -> float:
        return self.info_len / self.block_len

    def var_degrees(self) -> np.ndarray:
        return self.var_mask.sum(axis=1)

    def check_degrees(self) -> np.ndarray:
        return self.check_mask.sum(axis=1)

    def parity_matrix_dense(self) -> np.ndarray:
        h = np.zeros((self.num_checks, self.block_len), dtype=np.uint8)
        rows, slots = np.nonzero(self.check_mask)
        h[rows, self.check_adj[rows, slots]] = 1
        return h

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        b = np.asarray(bits, dtype=np.uint8)
        padded = np.concatenate([b, np.zeros(1, dtype=np.uint8)])  # -1 -> 0
        return np.bitwise_xor.reduce(
            np.where(self.check_mask, padded[self.check_adj], 0), axis=1
        )


def _count_four_cycle_pairs(h: np.ndarray) -> int:
    """Number of check pairs sharing >= 2 variables (each such pair closes at
    least one length-4 cycle)."""
    overlap = (h.astype(np.int32) @ h.T.astype(np.int32))
    iu = np.triu_indices(h.shape[0], k=1)
    return int(np.count_nonzero(overlap[iu] >= 2))


def _gf2_rref(h: np.ndarray):
    """Reduced row echelon form over GF(2). Returns (rref, pivot_cols)."""
    a = h.copy().astype(np.uint8)
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        hit = np.nonzero(a[row:, col])[0]
        if hit.size == 0:
            continue
        p = row + hit[0]
        if p != row:
            a[[row, p]] = a[[p, row]]
        elim = np.nonzero(a[:, col])[0]
        elim = elim[elim != row]
        a[elim] ^= a[row]
        pivots.append(col)
        row += 1
    return a[:row], np.asarray(pivots, dtype=np.int64)


def _finalize_code(h: np.ndarray, seed=None) -> LdpcCode:
    """Build the LdpcCode object (adjacency, encoder) from a dense parity
    matrix."""
    m, n = h.shape
    check_deg = h.sum(axis=1).astype(int)
    var_deg = h.sum(axis=0).astype(int)
    if np.any(check_deg == 0) or np.any(var_deg == 0):
        raise ConstructionError("every row and column must have weight >= 1")
    max_dc, max_dv = int(check_deg.max()), int(var_deg.max())

    check_adj = np.full((m, max_dc), -1, dtype=np.int64)
    check_mask = np.zeros((m, max_dc), dtype=bool)
    for c in range(m):
        vs = np.nonzero(h[c])[0]
        check_adj[c, : vs.size] = vs
        check_mask[c, : vs.size] = True
    var_adj = np.full((n, max_dv), -1, dtype=np.int64)
    var_mask = np.zeros((n, max_dv), dtype=bool)
    for v in range(n):
        cs = np.nonzero(h[:, v])[0]
        var_adj[v, : cs.size] = cs
        var_mask[v, : cs.size] = True

    rref, pivots = _gf2_rref(h)
    rank = len(pivots)
    sys_cols = np.setdiff1d(np.arange(n), pivots)
    encode_matrix = rref[:, sys_cols].astype(np.uint8)

    return LdpcCode(
        block_len=n,
        num_checks=m,
        check_adj=check_adj,
        check_mask=check_mask,
        var_adj=var_adj,
        var_mask=var_mask,
        pivot_cols=pivots,
        systematic_cols=sys_cols,
        encode_matrix=encode_matrix,
        rank=rank,
        num_four_cycle_pairs=_count_four_cycle_pairs(h),
        seed=seed,
    )


def from_parity_matrix(h: np.ndarray) -> LdpcCode:
    """Wrap an arbitrary dense binary parity matrix (used by tests and by
    alist import)."""
    h = np.asarray(h, dtype=np.uint8) % 2
    return _finalize_code(h)


def _peg_attempt(block_len: int, var_deg: int, check_deg: int,
                 rng: np.random.Generator) -> np.ndarray:
    """One progressive-edge-growth pass with exact check-degree capacity.

    For each new edge of a variable the check is chosen at maximal BFS
    distance in the current graph (unreachable preferred), breaking ties by
    lowest current degree and then at random. Returns the dense parity
    matrix; regularity is guaranteed, girth >= 6 is best-effort.
    """
    num_checks = block_len * var_deg // check_deg
    var_lists: list[list[int]] = [[] for _ in range(block_len)]
    check_lists: list[list[int]] = [[] for _ in range(num_checks)]
    degrees = np.zeros(num_checks, dtype=np.int64)

    order = rng.permutation(block_len)
    for v in order:
        for _ in range(var_deg):
            capacity = degrees < check_deg
            taken = np.zeros(num_checks, dtype=bool)
            taken[var_lists[v]] = True
            allowed = capacity & ~taken
            if not np.any(allowed):
                raise ConstructionError("PEG deadlock: no check with free capacity")
            if var_lists[v]:
                # BFS from v over the bipartite graph built so far.
                dist = np.full(num_checks, -1, dtype=np.int64)
                frontier = list(var_lists[v])
                dist[frontier] = 0
                seen_vars = {v}
                depth = 0
                while frontier:
                    nxt_vars = []
                    for c in frontier:
                        for u in check_lists[c]:
                            if u not in seen_vars:
                                seen_vars.add(u)
                                nxt_vars.append(u)
                    frontier = []
                    depth += 1
                    for u in nxt_vars:
                        for c in var_lists[u]:
                            if dist[c] < 0:
                                dist[c] = depth
                                frontier.append(c)
                unreached = allowed & (dist < 0)
                if np.any(unreached):
                    cand = np.nonzero(unreached)[0]
                else:
                    best = dist[allowed].max()
                    cand = np.nonzero(allowed & (dist == best))[0]
            else:
                cand = np.nonzero(allowed)[0]
            cand = cand[degrees[cand] == degrees[cand].min()]
            c = int(rng.choice(cand))
            var_lists[v].append(c)
            check_lists[c].append(int(v))
            degrees[c] += 1

    h = np.zeros((num_checks, block_len), dtype=np.uint8)
    for v, cs in enumerate(var_lists):
        h[cs, v] = 1
    return h


def construct_regular(block_len: int, var_deg: int, check_deg: int, seed,
                      max_attempts: int = 8) -> LdpcCode:
    """Build a (var_deg, check_deg)-regular code of length block_len.

    block_len * var_deg must be divisible by check_deg. Construction retries
    with derived seeds, keeping the attempt with the fewest length-4 cycles
    (zero ends the search early). Note that even column weight forces at
    least one dependent parity check, so info_len exceeds
    block_len - num_checks accordingly.
    """
    if block_len < 1 or var_deg < 1 or check_deg < 1:
        raise ConstructionError("degrees and length must be >= 1")
    if (block_len * var_deg) % check_deg != 0:
        raise ConstructionError(
            f"block_len*var_deg = {block_len * var_deg} not divisible by check_deg = {check_deg}"
        )
    if block_len * var_deg // check_deg > block_len:
        raise ConstructionError("more checks than variables; profile infeasible")

    best_h = None
    best_cycles = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        h = _peg_attempt(block_len, var_deg, check_deg, rng)
        cycles = _count_four_cycle_pairs(h)
        if best_cycles is None or cycles < best_cycles:
            best_h, best_cycles = h, cycles
        if cycles == 0:
            break
    code = _finalize_code(best_h, seed=seed)
    return code


def encode(code: LdpcCode, info_bits: np.ndarray) -> np.ndarray:
    """Systematic encoding: info bits land on the non-pivot columns, parity
    bits solve all checks."""
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape != (code.info_len,):
        raise ConstructionError(
            f"expected {code.info_len} info bits, got {info.shape}"
        )
    word = np.zeros(code.block_len, dtype=np.uint8)
    word[code.systematic_cols] = info
    word[code.pivot_cols] = (code.encode_matrix @ info) % 2
    return word


def _llr_from_p1(p1: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p1, dtype=float), CLAMP_EPS, 1.0 - CLAMP_EPS)
    return np.clip(np.log((1.0 - p) / p), -_LLR_MAX, _LLR_MAX)


def _p1_from_llr(llr: np.ndarray) -> np.ndarray:
    p1 = 1.0 / (1.0 + np.exp(np.clip(llr, -_LLR_MAX, _LLR_MAX)))
    return np.clip(p1, CLAMP_EPS, 1.0 - CLAMP_EPS)


def _excl_prod(t: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Leave-one-out product along the last axis, padded entries acting as 1."""
    t = np.where(mask, t, 1.0)
    left = np.ones_like(t)
    right = np.ones_like(t)
    np.cumprod(t[..., :-1], axis=-1, out=left[..., 1:])
    np.cumprod(t[..., :0:-1], axis=-1, out=right[..., -2::-1])
    return left * right


@dataclass(frozen=True)
class DecodeResult:
    posterior: BitBeliefs
    extrinsic: BitBeliefs
    syndrome_ok: bool
    iterations_run: int


def decode_spa(code: LdpcCode, priors, iterations: int,
               early_exit: bool = True) -> DecodeResult:
    """Flooding sum-product decoding for a fixed number of iterations.

    priors is a BitBeliefs or a raw P(bit=1) array of length block_len. The
    posterior satisfies posterior = C * prior * extrinsic per bit. With
    early_exit the loop stops once the hard decision satisfies all checks;
    disable it when fully converged beliefs are needed (exact marginals on
    cycle-free graphs take diameter-many iterations). A nonzero final
    syndrome is reported through syndrome_ok, never raised.
    """
    p1 = priors.prob_one if isinstance(priors, BitBeliefs) else priors
    p1 = np.asarray(p1, dtype=float)
    if p1.shape != (code.block_len,):
        raise ConstructionError(f"expected {code.block_len} priors, got {p1.shape}")
    if iterations < 1:
        raise ConstructionError("iterations must be >= 1")

    llr_prior = _llr_from_p1(p1)
    m, dc = code.check_adj.shape
    safe_adj = np.where(code.check_mask, code.check_adj, 0)

    # variable-to-check messages laid out on the (check, slot) grid
    msg_vc = np.where(code.check_mask, llr_prior[safe_adj], _LLR_MAX)
    ext_llr = np.zeros(code.block_len)
    syndrome_ok = False
    it_run = 0
    for it in range(iterations):
        it_run = it + 1
        t = np.tanh(0.5 * np.clip(msg_vc, -_LLR_MAX, _LLR_MAX))
        prod = np.clip(_excl_prod(t, code.check_mask), -1.0 + 1e-15, 1.0 - 1e-15)
        msg_cv = 2.0 * np.arctanh(prod)

        flat_cv = msg_cv.reshape(-1)[code._var_edge_ids]  # (n, max_dv)
        flat_cv = np.where(code.var_mask, flat_cv, 0.0)
        ext_llr = flat_cv.sum(axis=1)
        total = llr_prior + ext_llr

        hard = (total < 0).astype(np.uint8)
        if early_exit and not np.any(code.syndrome(hard)):
            syndrome_ok = True
            break

        # next var-to-check: total minus own incoming, re-scattered
        out = np.clip(total[:, None] - flat_cv, -_LLR_MAX, _LLR_MAX)
        msg_vc = np.full((m * dc,), _LLR_MAX)
        msg_vc[code._var_edge_ids[code.var_mask]] = out[code.var_mask]
        msg_vc = msg_vc.reshape(m, dc)

    post_llr = llr_prior + ext_llr
    if not syndrome_ok:
        hard = (post_llr < 0).astype(np.uint8)
        syndrome_ok = not np.any(code.syndrome(hard))
    return DecodeResult(
        posterior=BitBeliefs(_p1_from_llr(post_llr), "a-posteriori"),
        extrinsic=BitBeliefs(_p1_from_llr(ext_llr), "extrinsic"),
        syndrome_ok=bool(syndrome_ok),
        iterations_run=it_run,
    )


def write_alist(code: LdpcCode, path) -> None:
    """Export the parity matrix in alist text format (1-based indices,
    zero-padded rows)."""
    dv = code.var_degrees()
    dc = code.check_degrees()
    lines = [
        f"{code.block_len} {code.num_checks}",
        f"{int(dv.max())} {int(dc.max())}",
        " ".join(str(int(d)) for d in dv),
        " ".join(str(int(d)) for d in dc),
    ]
    for v in range(code.block_len):
        entries = (code.var_adj[v, code.var_mask[v]] + 1).tolist()
        entries += [0] * (int(dv.max()) - len(entries))
        lines.append(" ".join(str(e) for e in entries))
    for c in range(code.num_checks):
        entries = (code.check_adj[c, code.check_mask[c]] + 1).tolist()
        entries += [0] * (int(dc.max()) - len(entries))
        lines.append(" ".join(str(e) for e in entries))
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_alist(path) -> LdpcCode:
    """Import a parity matrix from alist text format."""
    with open(path, "r", encoding="ascii") as f:
        tokens = f.read().split("\n")
    rows = [r.split() for r in tokens if r.strip()]
    n, m = int(rows[0][0]), int(rows[0][1])
    var_rows = rows[4 : 4 + n]
    h = np.zeros((m, n), dtype=np.uint8)
    for v, entries in enumerate(var_rows):
        for e in entries:
            c = int(e)
            if c > 0:
                h[c - 1, v] = 1
    return from_parity_matrix(h)
