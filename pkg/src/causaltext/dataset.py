"""Dataset assembly: named variants, position sweep, augmentation, export.

A dataset is a list of scenario records split into train/validation plus
a manifest of counts that downstream analytics and oracle scorers consume
as a stand-in for "what the model was trained on".
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from causaltext.common import (
    DataError,
    atomic_write_text,
    canonical_json,
    rng_stream,
    sha256_text,
    worker_count,
)
from causaltext.graphs import CausalGraph, Reachability, RelationGraph, graphs_to_dict
from causaltext.scenarios import (
    EXPLICIT_CAUSAL,
    EXPLICIT_NOT_CAUSAL,
    OCCURRENCE,
    TEMPORAL,
    EventChain,
    GraphIndex,
    RelationInstance,
    RelationMix,
    sample_event_chains,
    sample_scenario,
)
from causaltext.templates import (
    TemplateInventory,
    TemplateSet,
    load_inventory,
    parse_policy,
    policy_to_json,
    render,
    render_scenario,
    text_from_template_ids,
)

log = logging.getLogger(__name__)

DEFAULT_NUM_SCENARIOS = 40_000
DEFAULT_TRAIN_SIZE = 36_000

_FAMILY_KINDS = {
    "temporal": ("temporal",),
    "spatial": ("spatial_pos", "spatial_neg"),
    "counterfactual": ("cf_pos", "cf_neg"),
}


@dataclass
class DatasetConfig:
    seed: int = 0
    num_scenarios: int = DEFAULT_NUM_SCENARIOS
    train_size: int = DEFAULT_TRAIN_SIZE
    kinds: tuple[str, ...] = ("temporal", "spatial", "counterfactual")
    policies: dict = field(default_factory=dict)
    occurrence_facts: bool = True
    inventory: str = "canonical"
    augmentation: dict | None = None

    def __post_init__(self):
        if self.num_scenarios < 0:
            raise DataError("num_scenarios must be >= 0")
        if not 0 <= self.train_size <= self.num_scenarios:
            raise DataError("train/validation split must sum to num_scenarios")
        unknown = set(self.kinds) - set(_FAMILY_KINDS)
        if unknown:
            raise DataError(f"unknown relation families: {sorted(unknown)}")
        self.policies = {k: parse_policy(v) for k, v in self.policies.items()}
        if self.augmentation is not None:
            f = float(self.augmentation.get("seen_fraction", 0.5))
            if not 0.0 <= f <= 1.0:
                raise DataError(f"seen_fraction {f} outside [0, 1]")
            self.augmentation = {"seen_fraction": f}

    @property
    def val_size(self) -> int:
        return self.num_scenarios - self.train_size

    def relation_kinds(self) -> tuple[str, ...]:
        kinds: list[str] = []
        for family in self.kinds:
            kinds.extend(_FAMILY_KINDS[family])
        if self.occurrence_facts:
            kinds.append(OCCURRENCE)
        return tuple(kinds)

    def policy_for(self, kind: str) -> tuple:
        if kind in self.policies:
            return self.policies[kind]
        if kind in (OCCURRENCE, EXPLICIT_CAUSAL, EXPLICIT_NOT_CAUSAL):
            return ("xy",)
        return ("random",)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "num_scenarios": self.num_scenarios,
            "train_size": self.train_size,
            "kinds": list(self.kinds),
            "policies": {k: policy_to_json(v) for k, v in self.policies.items()},
            "occurrence_facts": self.occurrence_facts,
            "inventory": self.inventory,
            "augmentation": self.augmentation,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetConfig":
        d = dict(d)
        preset = d.pop("preset", None)
        base = preset_config(preset) if preset else DatasetConfig()
        merged = {
            "seed": d.get("seed", base.seed),
            "num_scenarios": d.get("num_scenarios", base.num_scenarios),
            "train_size": d.get("train_size", base.train_size),
            "kinds": tuple(d.get("kinds", base.kinds)),
            "policies": {**{k: policy_to_json(v) for k, v in base.policies.items()}, **d.get("policies", {})},
            "occurrence_facts": d.get("occurrence_facts", base.occurrence_facts),
            "inventory": d.get("inventory", base.inventory),
            "augmentation": d.get("augmentation", base.augmentation),
        }
        known = set(merged) | {"preset"}
        extra = set(d) - known
        if extra:
            raise DataError(f"unknown config keys: {sorted(extra)}")
        return DatasetConfig(**merged)


def preset_config(name: str, **overrides) -> DatasetConfig:
    """Named dataset variants; sizes and seed default to the standard run."""
    presets = {
        "temporal_xy": dict(kinds=("temporal",), policies={"temporal": "xy"}),
        "temporal_yx": dict(kinds=("temporal",), policies={"temporal": "yx"}),
        "temporal": dict(kinds=("temporal",), policies={"temporal": "random"}),
        "spatial": dict(kinds=("spatial",)),
        "spatial_xy": dict(
            kinds=("spatial",),
            policies={"spatial_pos": "xy", "spatial_neg": "xy"},
        ),
        "counterfactual": dict(kinds=("counterfactual",)),
        "all": dict(kinds=("temporal", "spatial", "counterfactual")),
    }
    if name not in presets:
        raise DataError(f"unknown preset {name!r}; know {sorted(presets)}")
    kwargs = dict(presets[name])
    kwargs.update(overrides)
    return DatasetConfig(**kwargs)


@dataclass
class DatasetRecord:
    id: int
    text: str
    relations: list[RelationInstance]
    template_ids: list[str]
    chains: list[EventChain]

    def events(self) -> set[int]:
        out = set()
        for r in self.relations:
            out.add(r.x)
            if r.y is not None:
                out.add(r.y)
        return out

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "relations": [r.to_list() for r in self.relations],
            "template_ids": list(self.template_ids),
            "chains": [c.to_dict() for c in self.chains],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetRecord":
        return DatasetRecord(
            id=d["id"],
            text=d["text"],
            relations=[RelationInstance.from_list(r) for r in d["relations"]],
            template_ids=list(d["template_ids"]),
            chains=[EventChain.from_dict(c) for c in d["chains"]],
        )


@dataclass
class Dataset:
    config: DatasetConfig
    train: list[DatasetRecord]
    val: list[DatasetRecord]
    manifest: dict


def _template_policies(cfg: DatasetConfig, inventory: TemplateInventory) -> dict[str, TemplateSet]:
    policies = {}
    for kind in cfg.relation_kinds():
        policies[kind] = inventory.set_for(kind, cfg.policy_for(kind))
    for kind, policy in cfg.policies.items():
        if kind not in policies:
            # configured but not emitted by the chosen relation families
            log.warning("policy for %r is unused with families %s", kind, cfg.kinds)
    return policies


# worker globals, set once per process by the pool initializer
_W: dict = {}


def _init_worker(gc: CausalGraph, gn: RelationGraph, cfg: DatasetConfig) -> None:
    inventory = load_inventory(cfg.inventory)
    _W["gc"] = gc
    _W["gn"] = gn
    _W["cfg"] = cfg
    _W["index"] = GraphIndex(gc, gn)
    _W["policies"] = _template_policies(cfg, inventory)
    _W["mix"] = RelationMix(kinds=cfg.kinds, occurrence_facts=cfg.occurrence_facts)


def _build_record(i: int) -> DatasetRecord:
    gc, gn, cfg = _W["gc"], _W["gn"], _W["cfg"]
    rng_structure = rng_stream(cfg.seed, i, 0)
    rng_render = rng_stream(cfg.seed, i, 1)
    chains = sample_event_chains(gc, rng_structure, index=_W["index"])
    scenario = sample_scenario(
        gc, gn, chains, rng_structure, mix=_W["mix"], index=_W["index"], seed_offset=i
    )
    text, template_ids = render_scenario(scenario, _W["policies"], rng_render)
    return DatasetRecord(
        id=i,
        text=text,
        relations=scenario.relations,
        template_ids=template_ids,
        chains=scenario.chains,
    )


def _build_chunk(span: tuple[int, int]) -> list[DatasetRecord]:
    lo, hi = span
    return [_build_record(i) for i in range(lo, hi)]


def build_dataset(
    gc: CausalGraph,
    gn: RelationGraph,
    cfg: DatasetConfig,
    workers: int | None = None,
) -> Dataset:
    """Build all scenario records deterministically.

    Every scenario draws from its own (seed, index) RNG stream, so the
    output is byte-identical for any worker count.
    """
    nworkers = worker_count(workers)
    inventory = load_inventory(cfg.inventory)
    n = cfg.num_scenarios
    if nworkers == 1 or n < 64:
        _init_worker(gc, gn, cfg)
        records = [_build_record(i) for i in range(n)]
    else:
        chunk = max(1, math.ceil(n / (nworkers * 4)))
        spans = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ProcessPoolExecutor(
            max_workers=nworkers, initializer=_init_worker, initargs=(gc, gn, cfg)
        ) as pool:
            records = []
            for part in pool.map(_build_chunk, spans):
                records.extend(part)
    records.sort(key=lambda r: r.id)
    train, val = records[: cfg.train_size], records[cfg.train_size :]
    dataset = Dataset(config=cfg, train=train, val=val, manifest={})
    if cfg.augmentation is not None:
        rng = rng_stream(cfg.seed, cfg.num_scenarios, 2)
        dataset = augment_explicit(
            dataset, gc, cfg.augmentation["seen_fraction"], rng, inventory=inventory
        )
    dataset.manifest = build_manifest(dataset, gc, gn, inventory)
    return dataset


def count_statements(records: Iterable[DatasetRecord], inventory: TemplateInventory) -> dict:
    """Statement statistics: per-kind counts, mention orders, temporal
    pair counts, and template usage."""
    kind_counts: dict[str, int] = {}
    mention: dict[tuple[int, int], int] = {}
    temporal: dict[tuple[int, int], int] = {}
    usage: dict[str, int] = {}
    n = 0
    for rec in records:
        n += 1
        for rel, tid in zip(rec.relations, rec.template_ids):
            kind_counts[rel.kind] = kind_counts.get(rel.kind, 0) + 1
            usage[tid] = usage.get(tid, 0) + 1
            if rel.y is None:
                continue
            t = inventory.by_id[tid]
            first, second = (rel.x, rel.y) if t.position == "xy" else (rel.y, rel.x)
            mention[(first, second)] = mention.get((first, second), 0) + 1
            if rel.kind == TEMPORAL:
                temporal[(rel.x, rel.y)] = temporal.get((rel.x, rel.y), 0) + 1
    return {
        "scenarios": n,
        "relations": dict(sorted(kind_counts.items())),
        "mention_orders": {f"{a},{b}": c for (a, b), c in sorted(mention.items())},
        "temporal_pairs": {f"{a},{b}": c for (a, b), c in sorted(temporal.items())},
        "template_usage": dict(sorted(usage.items())),
    }


def build_manifest(
    dataset: Dataset,
    gc: CausalGraph,
    gn: RelationGraph,
    inventory: TemplateInventory,
) -> dict:
    graph_hash = sha256_text(canonical_json(graphs_to_dict(gc, gn)))
    manifest = {
        "config": dataset.config.to_json_dict(),
        "graph": {"n": gc.n, "seed": gc.seed, "hash": graph_hash},
        "templates": {"inventory": inventory.name, "hash": inventory.source_hash},
        "counts": {
            "train": count_statements(dataset.train, inventory),
            "val": count_statements(dataset.val, inventory),
        },
    }
    if dataset.manifest.get("augmentation"):
        manifest["augmentation"] = dataset.manifest["augmentation"]
    return manifest


def _unrelated_pairs(gc: CausalGraph) -> list[tuple[int, int]]:
    reach = Reachability(gc.vertices(), gc.children_of)
    out = []
    for x in gc.vertices():
        for y in gc.vertices():
            if x < y and reach.unrelated(x, y):
                out.append((x, y))
    return out


def augment_explicit(
    dataset: Dataset,
    gc: CausalGraph,
    seen_fraction: float,
    rng,
    inventory: TemplateInventory | None = None,
) -> Dataset:
    """Inject explicit causal/not-causal statements into train scenarios.

    Causal edges are split into seen/unseen; each seen edge contributes
    one explicit statement placed in a train scenario that already
    mentions both events (or a fresh minimal scenario). A matched sample
    of unrelated pairs gets explicit negative statements. The partition is
    recorded for the seen/unseen evaluation report.
    """
    if not 0.0 <= seen_fraction <= 1.0:
        raise ValueError(f"seen_fraction {seen_fraction} outside [0, 1]")
    if inventory is None:
        inventory = load_inventory(dataset.config.inventory)
    edges = sorted(gc.edges)
    k = math.ceil(seen_fraction * len(edges))
    picked = sorted(int(i) for i in rng.choice(len(edges), size=k, replace=False))
    picked_set = set(picked)
    seen = [edges[i] for i in picked]
    unseen = [e for i, e in enumerate(edges) if i not in picked_set]

    unrelated = _unrelated_pairs(gc)
    k_neg = min(len(edges), len(unrelated))
    neg_idx = sorted(int(i) for i in rng.choice(len(unrelated), size=k_neg, replace=False))
    neg_pairs = [unrelated[i] for i in neg_idx]

    train = [replace(r) for r in dataset.train]
    by_events: dict[int, set[int]] = {}
    for ti, rec in enumerate(train):
        for e in rec.events():
            by_events.setdefault(e, set()).add(ti)

    next_id = dataset.config.num_scenarios
    occurrence = dataset.config.occurrence_facts

    def inject(kind: str, x: int, y: int) -> None:
        nonlocal next_id
        tset = inventory.set_for(kind, dataset.config.policy_for(kind))
        candidates = sorted(by_events.get(x, set()) & by_events.get(y, set()))
        rel = RelationInstance(kind, x, y)
        statement, tid = render(rel, tset, rng)
        if candidates:
            rec = train[candidates[int(rng.integers(len(candidates)))]]
            rec.relations = rec.relations + [rel]
            rec.template_ids = rec.template_ids + [tid]
            rec.text = text_from_template_ids(rec.relations, rec.template_ids, inventory)
        else:
            relations: list[RelationInstance] = []
            template_ids: list[str] = []
            if occurrence:
                for e in (x, y):
                    occ = RelationInstance(OCCURRENCE, e)
                    relations.append(occ)
                    template_ids.append("occ1")
            relations.append(rel)
            template_ids.append(tid)
            rec = DatasetRecord(
                id=next_id,
                text=text_from_template_ids(relations, template_ids, inventory),
                relations=relations,
                template_ids=template_ids,
                chains=[],
            )
            next_id += 1
            train.append(rec)
            ti = len(train) - 1
            for e in (x, y):
                by_events.setdefault(e, set()).add(ti)

    for x, y in seen:
        inject(EXPLICIT_CAUSAL, x, y)
    for x, y in neg_pairs:
        inject(EXPLICIT_NOT_CAUSAL, x, y)

    out = Dataset(config=dataset.config, train=train, val=dataset.val, manifest={})
    out.manifest["augmentation"] = {
        "seen_fraction": seen_fraction,
        "seen_edges": [list(e) for e in seen],
        "unseen_edges": [list(e) for e in unseen],
        "explicit_not_causal_pairs": [list(p) for p in neg_pairs],
    }
    return out


def write_dataset(dataset: Dataset, out_dir: str | Path, provenance: dict | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for split, records in (("train", dataset.train), ("val", dataset.val)):
        jsonl = "".join(canonical_json(r.to_json_dict()) + "\n" for r in records)
        txt = "".join(r.text + "\n" for r in records)
        paths[f"{split}.jsonl"] = out_dir / f"{split}.jsonl"
        paths[f"{split}.txt"] = out_dir / f"{split}.txt"
        atomic_write_text(paths[f"{split}.jsonl"], jsonl)
        atomic_write_text(paths[f"{split}.txt"], txt)
    manifest = dict(dataset.manifest)
    if provenance:
        manifest["provenance"] = provenance
    paths["manifest.json"] = out_dir / "manifest.json"
    atomic_write_text(paths["manifest.json"], canonical_json(manifest, indent=2) + "\n")
    return paths


def read_manifest(path: str | Path) -> dict:
    import json

    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read manifest {path}: {e}") from e


def read_records(path: str | Path) -> list[DatasetRecord]:
    import json

    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(DatasetRecord.from_json_dict(json.loads(line)))
    return out


def mention_order_counts(manifest: dict, split: str = "train") -> dict[tuple[int, int], int]:
    raw = manifest["counts"][split]["mention_orders"]
    out = {}
    for key, c in raw.items():
        a, b = key.split(",")
        out[(int(a), int(b))] = c
    return out


def temporal_pair_counts(manifest: dict, split: str = "train") -> dict[tuple[int, int], int]:
    raw = manifest["counts"][split]["temporal_pairs"]
    out = {}
    for key, c in raw.items():
        a, b = key.split(",")
        out[(int(a), int(b))] = c
    return out
