"""
kerncollab: collaborative kernelized bandits with personalized rewards
"""

from kerncollab.config import ExperimentConfig, load_config
from kerncollab.gp_exact import GPPosterior
from kerncollab.gp_sparse import InducingModel
from kerncollab.harness import Simulation, compare, run_experiment, sweep_inducing
from kerncollab.main import main
from kerncollab.policies import CEPEPolicy, EpochSchedule, GreedyAcquisitionPolicy, SCEPEPolicy

__all__ = [
    'main', 'ExperimentConfig', 'load_config', 'GPPosterior', 'InducingModel', 'Simulation',
    'run_experiment', 'compare', 'sweep_inducing', 'EpochSchedule', 'CEPEPolicy', 'SCEPEPolicy',
    'GreedyAcquisitionPolicy',
]
