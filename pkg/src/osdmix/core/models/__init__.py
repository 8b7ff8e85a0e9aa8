"""
Domain types of osdmix.
"""

from osdmix.core.models.clt import (
    BlockSumReport,
    CfIndependence,
    DeltaSchedule,
    LimitDistance,
    NormalizerReport,
    NormalizerTrack,
)
from osdmix.core.models.laws import GaussianLaw, JumpLaw, LevySpec, OsdSampler
from osdmix.core.models.linear import Idempotent, Mat
from osdmix.core.models.process import PathBatch, ProcessSpec, ProcessVariant
from osdmix.core.models.report import Flag, Report
from osdmix.core.models.semigroup import GeneratorCertificate, KernelResult, MembershipResult

__all__ = [
    "BlockSumReport",
    "CfIndependence",
    "DeltaSchedule",
    "Flag",
    "GaussianLaw",
    "GeneratorCertificate",
    "Idempotent",
    "JumpLaw",
    "KernelResult",
    "LevySpec",
    "LimitDistance",
    "Mat",
    "MembershipResult",
    "NormalizerReport",
    "NormalizerTrack",
    "OsdSampler",
    "PathBatch",
    "ProcessSpec",
    "ProcessVariant",
    "Report",
]
