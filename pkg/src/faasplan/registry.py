"""Registry of known pipelines and similarity-based provisioning.

A newly submitted pipeline about which nothing is known ("agnostic")
is matched against every registered call graph by approximate edit
distance. When the closest graph lies within the threshold, the matched
entry's trained models provision the newcomer at its own rate and
deadline; otherwise the caller gets an explicit no-match outcome and
falls back to the grid-search oracle or a default configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Mapping, Optional, Tuple

from .callgraph import CallGraph, GedResult, approx_ged
from .errors import DuplicateId, EmptyRegistry
from .model import ClusterSpec, PipelineSpec, PricingScheme
from .predictor import PredictionModel
from .provisioner import ConfigurationCatalog, SelectionReport, select_configuration

#: Administrator-tunable similarity cutoff; distances above it mean "unknown".
DEFAULT_THRESHOLD = 5.0


@dataclass(frozen=True, eq=False)
class KnownPipelineEntry:
    pipeline: PipelineSpec
    callgraph: CallGraph
    models: Mapping[str, PredictionModel]
    observed_throughput: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", dict(self.models))
        missing = [f for f in self.pipeline.functions if f not in self.models]
        if missing:
            raise ValueError(f"no model for pipeline functions {missing}")
        if self.observed_throughput <= 0:
            raise ValueError("observed_throughput must be positive")


@dataclass(frozen=True)
class MatchDecision:
    matched: Optional[KnownPipelineEntry]
    distance: GedResult
    threshold_used: float

    def __post_init__(self) -> None:
        if self.threshold_used < 0:
            raise ValueError("threshold must be non-negative")
        if self.matched is not None and self.distance.distance > self.threshold_used:
            raise ValueError("matched entry lies beyond the threshold")


@dataclass(frozen=True)
class AgnosticProvisioning:
    """Outcome of provisioning a zero-knowledge pipeline.

    `selection` is None exactly when no registered pipeline was similar
    enough — a signal to fall back, not a failure.
    """

    decision: MatchDecision
    selection: Optional[SelectionReport]

    @property
    def matched(self) -> bool:
        return self.selection is not None


@dataclass
class PipelineRegistry:
    """Insertion-ordered collection of known pipelines.

    When `directory` is set, every successful register() call writes the
    entry's descriptor, call-graph and model files there.
    """

    directory: Optional[Path] = None
    _entries: List[KnownPipelineEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def ids(self) -> Tuple[str, ...]:
        return tuple(e.pipeline.id for e in self._entries)

    def get(self, pipeline_id: str) -> KnownPipelineEntry:
        for entry in self._entries:
            if entry.pipeline.id == pipeline_id:
                return entry
        raise KeyError(pipeline_id)

    def register(self, entry: KnownPipelineEntry) -> int:
        if any(e.pipeline.id == entry.pipeline.id for e in self._entries):
            raise DuplicateId(f"pipeline {entry.pipeline.id} is already registered")
        self._entries.append(entry)
        if self.directory is not None:
            from .fileio import save_registry_entry

            save_registry_entry(entry, self.directory, position=len(self._entries) - 1)
        return len(self._entries)

    def find_most_similar(
        self, g: CallGraph, threshold: float = DEFAULT_THRESHOLD
    ) -> MatchDecision:
        """Closest registered pipeline by approximate edit distance.

        Distances are ranked ascending with ties resolved by insertion
        order; the winner is returned as the match only when its
        distance is within the threshold, otherwise `matched` is None
        and the decision reports the minimum distance found.
        """
        if threshold < 0:
            raise ValueError("threshold must be non-negative")
        if not self._entries:
            raise EmptyRegistry("no pipelines registered")
        distances = [approx_ged(g, e.callgraph) for e in self._entries]
        order = sorted(range(len(distances)), key=lambda i: (distances[i].distance, i))
        best = order[0]
        if distances[best].distance <= threshold:
            return MatchDecision(
                matched=self._entries[best],
                distance=distances[best],
                threshold_used=threshold,
            )
        return MatchDecision(matched=None, distance=distances[best], threshold_used=threshold)

    def provision_agnostic(
        self,
        g: CallGraph,
        target_rate: float,
        deadline: float,
        catalog: ConfigurationCatalog,
        cluster: ClusterSpec,
        pricing: PricingScheme,
        threshold: float = DEFAULT_THRESHOLD,
    ) -> AgnosticProvisioning:
        """Provision an unknown pipeline via its most similar known one.

        On a match the matched entry's models run through the normal
        configuration selection at the submission's rate and deadline.
        """
        decision = self.find_most_similar(g, threshold)
        if decision.matched is None:
            return AgnosticProvisioning(decision=decision, selection=None)
        entry = decision.matched
        pipeline = replace(entry.pipeline, deadline_s=deadline, target_rate=target_rate)
        selection = select_configuration(
            pipeline, entry.models, catalog, target_rate, cluster, pricing
        )
        return AgnosticProvisioning(decision=decision, selection=selection)
