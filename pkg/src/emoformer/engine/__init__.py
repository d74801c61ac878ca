from emoformer.engine.gradcheck import (
    GradcheckResult,
    gradcheck,
    known_gradcheck_cases,
    relative_error,
    run_gradcheck_suite,
)
from emoformer.engine.init import glorot_uniform, ones, zeros
from emoformer.engine.ops import (
    AttentionWeights,
    Mode,
    Padding,
    add,
    add_bias,
    batch_norm,
    bmm,
    concat,
    conv2d,
    cross_entropy,
    dense,
    dropout,
    flatten,
    global_avg_pool,
    layer_norm,
    matmul,
    max_pool2d,
    mean_all,
    mul,
    multi_head_attention,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    sum_all,
    transpose,
)
from emoformer.engine.optim import Adam, AdamHyperparameters, AdamState, adam_step
from emoformer.engine.tensor import (
    GradTape,
    Tensor,
    backward,
    default_dtype,
    no_grad,
    parameter,
    precision,
)
