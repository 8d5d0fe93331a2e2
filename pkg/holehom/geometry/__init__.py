"""
Admissible random inclusion geometries on the periodic torus
"""

from .inclusions import (
    AdmissibilityReport,
    GeneratorTag,
    Inclusion,
    InclusionSet,
    check_admissible,
    extension_domains,
    inside_ball,
    meets_ball,
    min_separation_ratio,
    periodic_displacement,
    periodic_distance,
)
from .samplers import (
    InclusionSampler,
    LatticeIIDSampler,
    PoissonHardcoreSampler,
    RadiusLaw,
    RandomParkingSampler,
    build_sampler,
    hardcore_inclusions,
    hardcore_radii,
    random_sequential_adsorption,
    resample_inside,
    resample_outside,
    sample_lattice_iid,
    sample_poisson_hardcore,
    sample_random_parking,
)
