"""Score-based generative modeling for tabular data.

Library layout:

    schema / codec      table schemas, CSV ingestion, min-max + one-hot codec
    sde                 VE / VP / sub-VP diffusion processes and kernels
    network             time-conditioned score network with exact autodiff
    spl                 self-paced record weighting and threshold schedule
    training            curriculum-weighted denoising score matching loop
    sampling            predictor-corrector and probability-flow samplers
    likelihood          exact log-probability via the flow ODE
    finetune            log-probability-gated fine-tuning
    evaluate            coverage, histogram distances, TSTR smoke check
    checkpoint / cli    portable model files and the command-line surface
"""

__version__ = "0.1.0"

from .schema import Column, Table, TableSchema, load_schema, save_schema
from .codec import (
    ColumnScaler,
    EncodedMatrix,
    decode,
    encode,
    fit_encode,
    load_csv,
    save_csv,
    softmax,
)
from .sde import PerturbKernel, SdeSpec
from .network import NetSpec, Parameters, forward, init_params, score_fn, score_vjp_fn
from .spl import SplConfig, SplState, advance_schedule, optimal_v, quantile, regularizer_value
