"""Task-agnostic text metrics: Exact Match, ChrF++, BERTScore, Kendall's tau.

ChrF++ follows the corpus formulation: character n-gram (1..6) and word
n-gram (1..2) statistics are accumulated over all segments, precision and
recall are averaged uniformly over the orders that occur at all, and combined
with beta=2 (recall weighted twice), scaled to [0, 100].

BERTScore uses greedy matching: each candidate token is matched to the
reference token with the highest cosine similarity (precision side), and
symmetrically for recall, without IDF weighting.

Kendall's tau is the tie-corrected tau-b. The two-sided p-value is exact for
n <= 8 (full enumeration of the n! arrangements of one ranking) and a normal
approximation with continuity correction above that.
"""

from __future__ import annotations

import itertools
import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

from .errors import DegenerateRanking, EmbedderFailure, LengthMismatch

# --- exact match ------------------------------------------------------------

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and English articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(predictions: Sequence[str], references: Sequence[str],
                mode: str = "strict") -> float:
    """Fraction of predictions equal to their reference, optionally normalized."""
    _check_corpus(predictions, references)
    if mode not in ("strict", "normalized"):
        raise ValueError(f"unknown exact-match mode: {mode!r}")
    if mode == "strict":
        hits = sum(p == r for p, r in zip(predictions, references))
    else:
        hits = sum(normalize_answer(p) == normalize_answer(r)
                   for p, r in zip(predictions, references))
    return hits / len(predictions)


def _check_corpus(predictions: Sequence[str], references: Sequence[str]) -> None:
    if len(predictions) != len(references):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(references)} references")
    if not predictions:
        raise LengthMismatch("empty corpus")


# --- chrf++ -----------------------------------------------------------------


@dataclass(frozen=True)
class ChrfConfig:
    char_n_max: int = 6
    word_n_max: int = 2
    beta: float = 2.0


def _char_ngrams(text: str, n: int) -> Counter:
    chars = "".join(text.split())  # spaces never occur inside char n-grams
    return Counter(chars[i:i + n] for i in range(len(chars) - n + 1))


def _word_ngrams(text: str, n: int) -> Counter:
    words = text.split()
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def chrf_pp(predictions: Sequence[str], references: Sequence[str],
            cfg: ChrfConfig = ChrfConfig()) -> float:
    """Corpus ChrF++ in [0, 100] from counts aggregated over all segments."""
    _check_corpus(predictions, references)
    orders = ([("char", n) for n in range(1, cfg.char_n_max + 1)]
              + [("word", n) for n in range(1, cfg.word_n_max + 1)])
    totals = {order: [0, 0, 0] for order in orders}  # [hyp total, ref total, matched]
    for pred, ref in zip(predictions, references):
        for order in orders:
            kind, n = order
            extract = _char_ngrams if kind == "char" else _word_ngrams
            hyp_counts = extract(pred, n)
            ref_counts = extract(ref, n)
            stats = totals[order]
            stats[0] += sum(hyp_counts.values())
            stats[1] += sum(ref_counts.values())
            stats[2] += sum((hyp_counts & ref_counts).values())

    precisions = []
    recalls = []
    for order in orders:
        hyp_total, ref_total, matched = totals[order]
        if hyp_total == 0 and ref_total == 0:
            continue  # order absent from both sides: skip it in the average
        precisions.append(matched / hyp_total if hyp_total else 0.0)
        recalls.append(matched / ref_total if ref_total else 0.0)
    if not precisions:
        return 0.0
    precision = sum(precisions) / len(precisions)
    recall = sum(recalls) / len(recalls)
    if precision + recall == 0:
        return 0.0
    beta_sq = cfg.beta ** 2
    f_score = (1 + beta_sq) * precision * recall / (beta_sq * precision + recall)
    return 100.0 * f_score


# --- bertscore --------------------------------------------------------------


class TokenEmbeddingProvider(Protocol):
    def embed_tokens(self, tokens: list[str]) -> list[Sequence[float]]: ...


def _unit(vector: Sequence[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    return [v / norm for v in vector] if norm else [0.0] * len(vector)


def bertscore(predictions: Sequence[str], references: Sequence[str],
              embedder: TokenEmbeddingProvider) -> tuple[float, float, float]:
    """Corpus (precision, recall, F1) from greedy token matching in embedding space.

    Tokens are whitespace-split. A segment where either side has no tokens
    contributes zeros but still counts toward the corpus means.
    """
    _check_corpus(predictions, references)
    p_scores, r_scores, f_scores = [], [], []
    for pred, ref in zip(predictions, references):
        pred_tokens = pred.split()
        ref_tokens = ref.split()
        if not pred_tokens or not ref_tokens:
            p_scores.append(0.0)
            r_scores.append(0.0)
            f_scores.append(0.0)
            continue
        try:
            pred_vecs = [_unit(v) for v in embedder.embed_tokens(pred_tokens)]
            ref_vecs = [_unit(v) for v in embedder.embed_tokens(ref_tokens)]
        except Exception as exc:
            raise EmbedderFailure(str(exc)) from exc
        sims = [[sum(a * b for a, b in zip(pv, rv)) for rv in ref_vecs]
                for pv in pred_vecs]
        precision = sum(max(row) for row in sims) / len(pred_vecs)
        recall = sum(max(sims[i][j] for i in range(len(pred_vecs)))
                     for j in range(len(ref_vecs))) / len(ref_vecs)
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        p_scores.append(precision)
        r_scores.append(recall)
        f_scores.append(f1)
    n = len(p_scores)
    return (sum(p_scores) / n, sum(r_scores) / n, sum(f_scores) / n)


# --- kendall's tau ----------------------------------------------------------

EXACT_TAU_LIMIT = 8


def _tau_b_statistic(a: Sequence[float], b: Sequence[float]) -> tuple[float, int]:
    """Return (tau_b, S) where S = concordant - discordant."""
    n = len(a)
    s = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = (a[i] > a[j]) - (a[i] < a[j])
            db = (b[i] > b[j]) - (b[i] < b[j])
            s += da * db
    n0 = n * (n - 1) // 2
    n1 = sum(t * (t - 1) // 2 for t in Counter(a).values())
    n2 = sum(t * (t - 1) // 2 for t in Counter(b).values())
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        raise DegenerateRanking("all scores equal on one side; tau undefined")
    return s / denom, s


def _exact_p_value(a: Sequence[float], b: Sequence[float], observed_tau: float) -> float:
    threshold = abs(observed_tau) - 1e-12
    hits = 0
    total = 0
    for perm in itertools.permutations(b):
        tau, _ = _tau_b_statistic(a, perm)
        hits += abs(tau) >= threshold
        total += 1
    return hits / total


def _approx_p_value(a: Sequence[float], b: Sequence[float], s: int) -> float:
    n = len(a)
    ties_a = [t for t in Counter(a).values() if t > 1]
    ties_b = [t for t in Counter(b).values() if t > 1]
    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in ties_a)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in ties_b)
    v1 = (sum(t * (t - 1) for t in ties_a) * sum(u * (u - 1) for u in ties_b)
          / (2 * n * (n - 1)))
    v2 = (sum(t * (t - 1) * (t - 2) for t in ties_a)
          * sum(u * (u - 1) * (u - 2) for u in ties_b)
          / (9 * n * (n - 1) * (n - 2)))
    var_s = (v0 - vt - vu) / 18 + v1 + v2
    if var_s <= 0:
        return 1.0
    z = max(0.0, abs(s) - 1.0) / math.sqrt(var_s)  # continuity correction
    return min(1.0, math.erfc(z / math.sqrt(2)))


def kendall_tau(scores_a: Sequence[float], scores_b: Sequence[float]
                ) -> tuple[float, float]:
    """Tau-b and a two-sided p-value (exact for n <= 8, normal approximation above)."""
    if len(scores_a) != len(scores_b):
        raise LengthMismatch(f"{len(scores_a)} vs {len(scores_b)} scores")
    if len(scores_a) < 2:
        raise LengthMismatch("need at least two scores per ranking")
    tau, s = _tau_b_statistic(scores_a, scores_b)
    if len(scores_a) <= EXACT_TAU_LIMIT:
        p_value = _exact_p_value(scores_a, scores_b, tau)
    else:
        p_value = _approx_p_value(scores_a, scores_b, s)
    return tau, p_value


def tau_method(n: int) -> str:
    return "exact" if n <= EXACT_TAU_LIMIT else "normal-approximation"
