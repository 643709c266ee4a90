"""Natural direct and indirect effects of multiple treatments through a
mediator with a latent mediator-outcome confounder."""

from .core import (BasisSpec, BasisTerm, ConfigurationError, EffectContrast, EffectEstimate,
                   FittedMediation, IdentificationError, MediationError, ObservationTable,
                   SampleSizeError, TreatmentProfile, WeakInstrumentError)
from .design import DesignMatrices, build_design, evaluate_basis_row, validate_identifiability
from .effects import average_effects, conditional_effects, effect_table, predict_gm, predict_gy
from .estimation import (TraditionalFit, fit_mediator_ols, fit_outcome_gmm, fit_proposed,
                         fit_traditional, recover_gamma)
from .inference import BootstrapConfig, BootstrapError, bootstrap_effects, percentile_interval
from .simulation import (ReplicationReport, StudyDGP, canonical_spec, generate_study_dataset,
                         run_replications, true_effects)

__version__ = "0.1.0"
