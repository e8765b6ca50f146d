"""Composable experiment plans (codes M1-M20), the matrix runner and hyperparameter sweeps.

A plan is an ordered list of steps drawn from :data:`STEP_NAMES` wrapped
around the normalize -> seed -> self-learn core. Steps are grouped by the
stage they act in and must appear in stage order::

    linear_transform / effective_dimred   (preprocessing, any order)
    fusion                                (preprocessing, after the above)
    iterative_dimred_init                 (initialization)
    cscbli                                (inference)
"""

from __future__ import annotations

import ast
import configparser
import contextlib
import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from os import PathLike
from pathlib import Path

from .cscbli import (CscbliConfig, build_unified, interpolate_rank, map_contextual,
                     save_spring_params, train_cscbli)
from .embeddings import Vocabulary, filter_by_frequency, load_embeddings, restrict_to_words
from .evaluation import EvalReport, GoldDictionary, load_gold, precision_at_k
from .init import InitConfig, iterative_dimred_init, unsupervised_init
from .preprocess import fuse, linear_transform, normalize, pca_reduce
from .retrieval import rank_targets
from .selflearn import AlignmentResult, SelfLearnConfig, save_alignment, self_learn

logger = logging.getLogger(__name__)

__all__ = [
    "STEP_NAMES",
    "PLAN_STEPS",
    "ALPHA_GRID",
    "MINFREQ_GRID",
    "ExperimentError",
    "ExperimentPlan",
    "ResultRow",
    "PipelineOutput",
    "validate_plan",
    "make_plan",
    "run_pipeline",
    "run_experiment",
    "run_matrix",
    "sweep_alpha",
    "sweep_minfreq",
    "write_results_csv",
    "read_results_csv",
    "format_table",
    "format_alpha_grid",
    "load_config",
]

STEP_NAMES = ("effective_dimred", "linear_transform", "fusion", "iterative_dimred_init", "cscbli")
_STAGE = {"effective_dimred": 0, "linear_transform": 0, "fusion": 1, "iterative_dimred_init": 2, "cscbli": 3}

LT, ED, IDI, FU, CS = "linear_transform", "effective_dimred", "iterative_dimred_init", "fusion", "cscbli"

# Steps in execution order. Fusion runs as a preprocessing step (before seeding);
# set fusion_stage = "post" to apply it to the aligned spaces instead.
PLAN_STEPS: dict[str, tuple[str, ...]] = {
    "M1": (),
    "M2": (ED,),
    "M3": (LT,),
    "M4": (LT, ED),
    "M5": (ED, LT),
    "M6": (IDI,),
    "M7": (LT, IDI),
    "M8": (FU,),
    "M9": (ED, FU),
    "M10": (LT, FU),
    "M11": (LT, ED, FU),
    "M12": (ED, LT, FU),
    "M13": (FU, IDI),
    "M14": (LT, FU, IDI),
    "M15": (CS,),
    "M16": (ED, CS),
    "M17": (LT, CS),
    "M18": (LT, ED, CS),
    "M19": (IDI, CS),
    "M20": (LT, IDI, CS),
}

ALPHA_GRID = (-0.5, -0.25, -0.15, 0.0, 0.15, 0.25, 0.5)
MINFREQ_GRID = (2, 4, 6, 8, 10)

_SELFLEARN_KEYS = {f.name for f in fields(SelfLearnConfig)} - {"seed"}
_CSCBLI_KEYS = {f.name for f in fields(CscbliConfig)} - {"seed", "dict_vocab_cutoff", "csls_neighborhood"}

HYPERPARAMETER_DEFAULTS: dict[str, object] = {
    "min_freq": None,
    "alpha_src": 0.0,
    "alpha_trg": 0.0,
    "ctx_alpha_src": None,
    "ctx_alpha_trg": None,
    "reduced_dim": None,
    "ctx_reduced_dim": None,
    "idr_target_dim": None,
    "idr_step": None,
    "idr_k_freq": None,
    "fusion_stage": "preprocess",
    "init_vocab_cutoff": 4000,
    "eval_retrieval": "nearest_neighbor",
    "ks": (1, 5, 10),
    **{f.name: f.default for f in fields(SelfLearnConfig) if f.name in _SELFLEARN_KEYS},
    **{f.name: f.default for f in fields(CscbliConfig) if f.name in _CSCBLI_KEYS},
}


class ExperimentError(RuntimeError):
    """A pipeline failure, tagged with the stage that raised it."""

    def __init__(self, code: str, stage: str, cause: BaseException):
        super().__init__(f"{code}: stage '{stage}' failed: {cause}")
        self.code = code
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentPlan:
    code: str
    steps: tuple[str, ...]
    src_embeddings: str
    trg_embeddings: str
    gold: str
    hyperparameters: dict = field(default_factory=dict)
    src_contextual: str | None = None
    trg_contextual: str | None = None
    src_freq: str | None = None
    trg_freq: str | None = None
    seed: int = 0
    embedding_kind: str = "static"
    language_pair: str = "src-trg"

    def hp(self, key):
        return self.hyperparameters.get(key, HYPERPARAMETER_DEFAULTS[key])


@dataclass(frozen=True)
class ResultRow:
    code: str
    embedding_kind: str
    language_pair: str
    pr_at_1: float
    delta_vs_baseline: float
    runtime_seconds: float
    seed: int
    evaluated: int = 0
    coverage: float = float("nan")
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class PipelineOutput:
    row: ResultRow
    report: EvalReport
    ranked: dict[str, list[str]]
    alignment: AlignmentResult
    src_vocab: Vocabulary
    trg_vocab: Vocabulary
    springs: tuple | None = None


def validate_plan(plan: ExperimentPlan) -> None:
    """Reject unknown steps, duplicates, unrealizable orders and unknown hyperparameters."""
    steps = plan.steps
    unknown = [s for s in steps if s not in _STAGE]
    if unknown:
        raise ValueError(f"{plan.code}: unknown steps {unknown}; valid: {STEP_NAMES}")
    if len(set(steps)) != len(steps):
        raise ValueError(f"{plan.code}: duplicate steps in {steps}")
    stages = [_STAGE[s] for s in steps]
    if stages != sorted(stages):
        raise ValueError(f"{plan.code}: step order {steps} is not realizable "
                         "(preprocessing, then fusion, then initialization, then cscbli)")
    if ED in steps and IDI in steps:
        raise ValueError(f"{plan.code}: effective_dimred and iterative_dimred_init are alternative placements")
    if CS in steps and not (plan.src_contextual and plan.trg_contextual):
        raise ValueError(f"{plan.code}: cscbli needs src_contextual and trg_contextual inputs")
    extra = set(plan.hyperparameters) - set(HYPERPARAMETER_DEFAULTS)
    if extra:
        raise ValueError(f"{plan.code}: unknown hyperparameters {sorted(extra)}")
    if plan.hp("fusion_stage") not in ("preprocess", "post"):
        raise ValueError(f"{plan.code}: fusion_stage must be 'preprocess' or 'post'")
    if plan.hp("min_freq") is not None and not (plan.src_freq and plan.trg_freq):
        raise ValueError(f"{plan.code}: min_freq needs src_freq and trg_freq sidecar files")


def make_plan(code: str, src_embeddings, trg_embeddings, gold, **kwargs) -> ExperimentPlan:
    """Plan for a known code (M1-M20) unless ``steps`` is passed explicitly."""
    steps = kwargs.pop("steps", None)
    if steps is None:
        if code not in PLAN_STEPS:
            raise ValueError(f"unknown experiment code {code!r} and no steps given")
        steps = PLAN_STEPS[code]
    plan = ExperimentPlan(code=code, steps=tuple(steps), src_embeddings=str(src_embeddings),
                          trg_embeddings=str(trg_embeddings), gold=str(gold), **kwargs)
    validate_plan(plan)
    return plan


@contextlib.contextmanager
def _stage(code, name):
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(code, name, exc) from exc


def _load_side(emb_path, freq_path, ctx_path, min_freq):
    vocab, emb = load_embeddings(emb_path, freq_path=freq_path)
    if min_freq is not None:
        vocab, emb = filter_by_frequency(vocab, emb, int(min_freq))
    ctx = None
    if ctx_path is not None:
        ctx_vocab, ctx_emb = load_embeddings(ctx_path)
        vocab, emb = restrict_to_words(vocab, emb, ctx_vocab.words)
        ctx = ctx_emb[[ctx_vocab.index[w] for w in vocab.words]]
    return vocab, emb, ctx


def _transform(m, alpha):
    # alpha == 0 is a rotation; skipping it (and the renormalization) keeps M3 bitwise equal to M1
    return m if alpha == 0 else normalize(linear_transform(m, alpha))


def _half(dim, override):
    return int(override) if override is not None else max(1, dim // 2)


def run_pipeline(plan: ExperimentPlan, gold: GoldDictionary | None = None) -> PipelineOutput:
    """Execute ``plan`` end to end and score Pr@k against its gold dictionary."""
    validate_plan(plan)
    code = plan.code
    hp = plan.hp
    steps = plan.steps
    use_ctx = CS in steps
    start = time.perf_counter()

    with _stage(code, "load"):
        src_vocab, x, ax = _load_side(plan.src_embeddings, plan.src_freq,
                                      plan.src_contextual if use_ctx else None, hp("min_freq"))
        trg_vocab, z, ay = _load_side(plan.trg_embeddings, plan.trg_freq,
                                      plan.trg_contextual if use_ctx else None, hp("min_freq"))
        if gold is None:
            gold = load_gold(plan.gold)

    with _stage(code, "normalize"):
        x, z = normalize(x), normalize(z)
        if use_ctx:
            ax, ay = normalize(ax), normalize(ay)

    fusion_post = FU in steps and hp("fusion_stage") == "post"
    for step in steps:
        if step not in (LT, ED) and not (step == FU and not fusion_post):
            continue
        with _stage(code, step):
            if step == LT:
                x = _transform(x, float(hp("alpha_src")))
                z = _transform(z, float(hp("alpha_trg")))
                if use_ctx and hp("ctx_alpha_src") is not None:
                    ax = _transform(ax, float(hp("ctx_alpha_src")))
                if use_ctx and hp("ctx_alpha_trg") is not None:
                    ay = _transform(ay, float(hp("ctx_alpha_trg")))
            elif step == ED:
                x = normalize(pca_reduce(x, _half(x.shape[1], hp("reduced_dim")))[0])
                z = normalize(pca_reduce(z, _half(z.shape[1], hp("reduced_dim")))[0])
                if use_ctx:
                    ax = normalize(pca_reduce(ax, _half(ax.shape[1], hp("ctx_reduced_dim")))[0])
                    ay = normalize(pca_reduce(ay, _half(ay.shape[1], hp("ctx_reduced_dim")))[0])
            else:
                x, z = fuse(x, z)
                x, z = normalize(x), normalize(z)

    init_cfg = InitConfig(vocab_cutoff=int(hp("init_vocab_cutoff")),
                          csls_neighborhood=int(hp("csls_neighborhood")), seed=plan.seed)
    with _stage(code, IDI if IDI in steps else "init"):
        if IDI in steps:
            start_dim = min(x.shape[1], z.shape[1])
            target = _half(start_dim, hp("idr_target_dim"))
            step = int(hp("idr_step")) if hp("idr_step") is not None else max(1, (start_dim - target) // 4)
            k_freq = hp("idr_k_freq")
            d0 = iterative_dimred_init(x, z, start_dim, target, step,
                                       int(k_freq) if k_freq is not None else None, init_cfg)
        else:
            d0 = unsupervised_init(x, z, init_cfg)

    sl_cfg = SelfLearnConfig(**{k: hp(k) for k in _SELFLEARN_KEYS}, seed=plan.seed)
    with _stage(code, "self_learn"):
        alignment = self_learn(x, z, d0, sl_cfg)
        xa, za = alignment.transform(x, z)
        if fusion_post:
            xa, za = fuse(xa, za)

    src_rows = [src_vocab.index[w] for w in gold if w in src_vocab.index]
    ks = tuple(int(k) for k in hp("ks"))
    topn = max(ks)
    springs = None
    if use_ctx:
        with _stage(code, CS):
            a0x, a0y = map_contextual(ax, ay, alignment.dictionary)
            cs_cfg = CscbliConfig(**{k: hp(k) for k in _CSCBLI_KEYS}, seed=plan.seed,
                                  dict_vocab_cutoff=int(hp("dict_vocab_cutoff")),
                                  csls_neighborhood=int(hp("csls_neighborhood")))
            trained = train_cscbli(xa, za, a0x, a0y, cs_cfg)
            ux = build_unified(xa, a0x, trained.params_x)
            uy = build_unified(za, a0y, trained.params_y)
            top = interpolate_rank(ux, uy, a0x, a0y, cs_cfg.lam, src_rows, topn)
            springs = (trained.params_x, trained.params_y)
    else:
        with _stage(code, "retrieval"):
            top = rank_targets(xa, za, src_rows, topn, method=hp("eval_retrieval"),
                               k=int(hp("csls_neighborhood")))

    with _stage(code, "evaluate"):
        ranked = {src_vocab.words[i]: [trg_vocab.words[j] for j in row] for i, row in zip(src_rows, top)}
        report = precision_at_k(ranked, gold, ks, trg_vocab)

    row = ResultRow(code=code, embedding_kind=plan.embedding_kind, language_pair=plan.language_pair,
                    pr_at_1=report.precision_at[1] if 1 in report.precision_at else float("nan"),
                    delta_vs_baseline=float("nan"), runtime_seconds=time.perf_counter() - start,
                    seed=plan.seed, evaluated=report.evaluated, coverage=report.coverage)
    return PipelineOutput(row=row, report=report, ranked=ranked, alignment=alignment,
                          src_vocab=src_vocab, trg_vocab=trg_vocab, springs=springs)


def _write_artifacts(out: PipelineOutput, directory: Path) -> None:
    save_alignment(directory, out.alignment, out.src_vocab, out.trg_vocab)
    with open(directory / "ranked.tsv", "w", encoding="utf-8", newline="\n") as f:
        for src, preds in out.ranked.items():
            f.write(src + "\t" + " ".join(preds) + "\n")
    if out.springs is not None:
        save_spring_params(directory / "springs", *out.springs)
    write_results_csv(directory / "result.csv", [out.row])


def run_experiment(plan: ExperimentPlan, out_dir: str | PathLike | None = None) -> ResultRow:
    """Run one plan; with ``out_dir`` its artifacts go to ``out_dir/<code>/``."""
    out = run_pipeline(plan)
    if out_dir is not None:
        _write_artifacts(out, Path(out_dir) / plan.code)
    return out.row


def _failed_row(plan: ExperimentPlan, exc: BaseException, runtime: float) -> ResultRow:
    return ResultRow(code=plan.code, embedding_kind=plan.embedding_kind, language_pair=plan.language_pair,
                     pr_at_1=float("nan"), delta_vs_baseline=float("nan"), runtime_seconds=runtime,
                     seed=plan.seed, error=str(exc))


def with_deltas(rows: list[ResultRow], baseline: str = "M1") -> list[ResultRow]:
    """Fill ``delta_vs_baseline`` from the baseline row with the same kind and language pair."""
    base = {(r.embedding_kind, r.language_pair): r.pr_at_1 for r in rows if r.code == baseline and r.ok}
    out = []
    for r in rows:
        b = base.get((r.embedding_kind, r.language_pair))
        delta = r.pr_at_1 - b if b is not None and r.ok else float("nan")
        out.append(replace(r, delta_vs_baseline=delta))
    return out


def run_matrix(plans: list[ExperimentPlan], out_dir: str | PathLike | None = None,
               threads: int = 1) -> list[ResultRow]:
    """Run independent plans (optionally concurrently) and compute deltas against M1.

    A failing plan yields a row with ``error`` set; the other plans still run.
    With ``out_dir``, writes per-plan artifacts, ``results.csv`` and ``results.txt``.
    """
    codes = [p.code for p in plans]
    if len(set(zip(codes, (p.embedding_kind for p in plans), (p.language_pair for p in plans)))) != len(plans):
        raise ValueError("plans must have unique (code, embedding_kind, language_pair)")

    def one(plan):
        t0 = time.perf_counter()
        try:
            return run_experiment(plan, out_dir)
        except Exception as exc:  # recorded per row; the matrix continues
            logger.error("%s failed: %s", plan.code, exc)
            return _failed_row(plan, exc, time.perf_counter() - t0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, plans))
    else:
        rows = [one(p) for p in plans]
    rows = with_deltas(rows)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_results_csv(out_dir / "results.csv", rows)
        (out_dir / "results.txt").write_text(format_table(rows), encoding="utf-8")
    return rows


def sweep_alpha(base: ExperimentPlan, grid=ALPHA_GRID, out_dir: str | PathLike | None = None,
                threads: int = 1) -> list[tuple[float, float, ResultRow]]:
    """Run the plan once per ``(alpha_src, alpha_trg)`` in ``grid x grid``.

    Plans without a linear_transform step get one prepended.
    """
    steps = base.steps if LT in base.steps else (LT, *base.steps)
    plans, keys = [], []
    for a_s in grid:
        for a_t in grid:
            hp = dict(base.hyperparameters, alpha_src=a_s, alpha_trg=a_t)
            plans.append(replace(base, code=f"{base.code}_as{a_s:+g}_at{a_t:+g}", steps=steps, hyperparameters=hp))
            keys.append((a_s, a_t))
    rows = run_matrix(plans, out_dir, threads)
    return [(a_s, a_t, r) for (a_s, a_t), r in zip(keys, rows)]


def sweep_minfreq(base: ExperimentPlan, thresholds=MINFREQ_GRID, out_dir: str | PathLike | None = None,
                  threads: int = 1) -> list[tuple[int, ResultRow]]:
    plans = [replace(base, code=f"{base.code}_minfreq{t}", hyperparameters=dict(base.hyperparameters, min_freq=t))
             for t in thresholds]
    rows = run_matrix(plans, out_dir, threads)
    return list(zip(thresholds, rows))


_CSV_FIELDS = [f.name for f in fields(ResultRow)]


def write_results_csv(path: str | PathLike, rows: list[ResultRow]) -> None:
    """Floats are written with ``repr`` so they read back bit-for-bit."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_CSV_FIELDS)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, n) for n in _CSV_FIELDS)])


def read_results_csv(path: str | PathLike) -> list[ResultRow]:
    types = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    with open(path, encoding="utf-8", newline="") as f:
        for rec in csv.DictReader(f):
            vals = {}
            for name, raw in rec.items():
                t = types[name]
                vals[name] = float(raw) if t == "float" else int(raw) if t == "int" else raw
            rows.append(ResultRow(**vals))
    return rows


def format_table(rows: list[ResultRow]) -> str:
    """Aligned plain-text table; ``*`` marks the best Pr@1 per (kind, language pair)."""
    best: dict[tuple, float] = {}
    for r in rows:
        key = (r.embedding_kind, r.language_pair)
        if r.ok and not math.isnan(r.pr_at_1):
            best[key] = max(best.get(key, -1.0), r.pr_at_1)
    header = ["code", "kind", "pair", "pr@1", "delta", "best", "seconds", "status"]
    body = []
    for r in rows:
        is_best = r.ok and best.get((r.embedding_kind, r.language_pair)) == r.pr_at_1
        body.append([r.code, r.embedding_kind, r.language_pair,
                     f"{100 * r.pr_at_1:.2f}" if r.ok else "-",
                     f"{100 * r.delta_vs_baseline:+.2f}" if not math.isnan(r.delta_vs_baseline) else "-",
                     "*" if is_best else "", f"{r.runtime_seconds:.1f}",
                     "ok" if r.ok else f"error: {r.error}"])
    widths = [max(len(str(c)) for c in col) for col in zip(header, *body)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header, *body]]
    return "\n".join(lines) + "\n"


def format_alpha_grid(results: list[tuple[float, float, ResultRow]]) -> str:
    """Pr@1 (percent) with target alphas as rows and source alphas as columns."""
    src_vals = sorted({a for a, _, _ in results})
    trg_vals = sorted({b for _, b, _ in results})
    cell = {(a, b): r for a, b, r in results}
    width = 8
    lines = ["TRG\\SRC".ljust(width) + "".join(f"{a:>{width}g}" for a in src_vals)]
    for b in trg_vals:
        vals = []
        for a in src_vals:
            r = cell.get((a, b))
            vals.append(f"{100 * r.pr_at_1:>{width}.2f}" if r is not None and r.ok else f"{'-':>{width}}")
        lines.append(f"{b:<{width}g}" + "".join(vals))
    return "\n".join(lines) + "\n"


_PLAN_KEYS = {"code", "steps", "src_embeddings", "trg_embeddings", "gold", "src_contextual",
              "trg_contextual", "src_freq", "trg_freq", "seed", "embedding_kind", "language_pair"}
_PATH_KEYS = {"src_embeddings", "trg_embeddings", "gold", "src_contextual", "trg_contextual", "src_freq", "trg_freq"}


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    if raw.lower() in ("none", ""):
        return None
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw


def load_config(path: str | PathLike, seed: int | None = None) -> list[ExperimentPlan]:
    """Parse an INI-style ``key = value`` config into plans, one per section.

    ``[DEFAULT]`` values are shared by all sections. The section name is the
    plan code unless ``code`` is given; ``steps`` (comma-separated) defaults
    to the steps of a known code. Relative paths resolve against the config
    file's directory. Every other key is a hyperparameter.
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as f:
        parser.read_file(f)
    plans = []
    for section in parser.sections():
        raw = dict(parser[section])
        code = raw.pop("code", section).strip()
        steps_raw = raw.pop("steps", None)
        steps = None if steps_raw is None else tuple(s.strip() for s in steps_raw.split(",") if s.strip())
        kwargs = {}
        for key in list(raw):
            if key in _PLAN_KEYS:
                value = raw.pop(key).strip()
                if key in _PATH_KEYS:
                    kwargs[key] = str((path.parent / value).resolve()) if value else None
                elif key == "seed":
                    kwargs[key] = int(value)
                else:
                    kwargs[key] = value
        if seed is not None:
            kwargs["seed"] = seed
        hyper = {k: _parse_value(v) for k, v in raw.items()}
        hyper = {k: v for k, v in hyper.items() if v is not None or k in ("min_freq",)}
        for key in ("src_embeddings", "trg_embeddings", "gold"):
            if not kwargs.get(key):
                raise ValueError(f"{path}: section [{section}] is missing {key}")
        src, trg, gold = kwargs.pop("src_embeddings"), kwargs.pop("trg_embeddings"), kwargs.pop("gold")
        plans.append(make_plan(code, src, trg, gold, steps=steps, hyperparameters=hyper, **kwargs))
    if not plans:
        raise ValueError(f"{path}: no plan sections found")
    return plans


def planted_config(directory: str | PathLike, codes=("M1",), seed: int = 0, **hyper) -> Path:
    """Write a config file next to a fixture written by :func:`ubli.synthetic.write_fixture`."""
    directory = Path(directory)
    lines = ["[DEFAULT]", "src_embeddings = src.vec", "trg_embeddings = trg.vec", "gold = gold.tsv",
             "src_freq = src.freq", "trg_freq = trg.freq", f"seed = {seed}"]
    if (directory / "src_ctx.vec").exists():
        lines += ["src_contextual = src_ctx.vec", "trg_contextual = trg_ctx.vec"]
    lines += [f"{k} = {v!r}" for k, v in hyper.items()]
    for code in codes:
        lines += ["", f"[{code}]"]
    path = directory / "plans.ini"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path

