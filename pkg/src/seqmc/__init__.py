"""Sampling toolkit for masked-conditional sequence scorers.

Treats masked-position scorers as energy-based sequence models, draws from
them with Metropolis-Hastings over masked-conditional proposals, and checks
the chains against exact enumeration on small state spaces.
"""

from .core import MaskedView, Sequence, Vocab, apply_mask, sequence_new
from .energy import (Energy, ProductModel, Scorer, TabularMLM, constant_model,
                     energy, energy_norm, energy_raw, load_tabular, mlm_conditional,
                     positional_logits, save_tabular, tabular_model_generate,
                     zero_model)
from .proposal import (BlockPolicy, Proposal, ProposalSettings, block_schedule,
                       nucleus_truncate, position_schedule, propose_block,
                       propose_single, temper)
from .sampler import (AnnealSchedule, ChainResult, ChainState, SamplerConfig,
                      anneal_temperature, degenerate_gibbs_step, mh_step,
                      run_chain, warm_start)
from .trace import StepOutcome, StepRecord, Trace, export_trace, record_step

__version__ = "0.1.0"
