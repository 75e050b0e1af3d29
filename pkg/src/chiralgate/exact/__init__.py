from chiralgate.exact.hamiltonian import (
    ChainError,
    ChainOperators,
    EffectiveHamiltonian,
    Sector,
    build_hamiltonian,
)
from chiralgate.exact.scattering import (
    CoarseGridWarning,
    NumericalFailure,
    SinglePhotonS,
    TwoPhotonScatterer,
    scatter_all_channels,
    scatter_state,
    single_photon_s,
    total_probability,
    two_photon_kernel,
)
from chiralgate.exact.oracle import (
    OracleNotConverged,
    single_photon_oracle,
    time_domain_norm,
    time_domain_oracle,
)
