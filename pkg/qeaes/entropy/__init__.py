"""Entropy acquisition, conditioning and health monitoring."""

from .sources import SourceDescriptor, RawBitstream, SourceHandle
from .sources import open_source, draw_bits, register_provider

from .conditioning import ConditionedEntropy, HybridSeed, VonNeumannExtractor
from .conditioning import von_neumann_extract, condense, mix_hybrid, hash_condition

from .health import HealthPolicy, HealthReport, EntropyEstimate, ReseedEvent
from .health import EventLog, GuardedSource
from .health import check_batch, guard_stream, estimate_min_entropy
