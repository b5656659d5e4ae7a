# preference_advisor/src/nnet.py
"""
前馈 Sigmoid 网络

- 传递函数 o_j = f(z_j)，z_j = Σ_i w_ji·o_i（默认无偏置单元）
- 阶段一：逐层前向传播；阶段二：输出层/隐藏层斜率 δ 反向传播，按 "学习率·δ_j·o_i + 动量·上一步改变量" 更新权重
- 逐样本（online）更新，每个 epoch 按种子打乱样本顺序

权重矩阵 weights[l] 的行对应第 l+1 层单元 j，列对应第 l 层单元 i（启用偏置时多一列常数 1 输入）。
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from tqdm import tqdm

from .errors import ConfigError, DataError, EmptyDataError, ShapeError, TrainingError
from .logger import logger

# 命名拓扑预设：paper52 为完整 52 色目录，eval8 为 8 个样本的评估用网络
PRESETS: Dict[str, Tuple[int, ...]] = {
    "paper52": (8, 30, 52),
    "eval8": (8, 30, 8),
}

# float64 下 expit 在 |z| 很大时恰好得到 0 或 1，夹到开区间 (0, 1) 内
_SIGMOID_LOW = float(np.nextafter(0.0, 1.0))
_SIGMOID_HIGH = float(np.nextafter(1.0, 0.0))

ProgressCallback = Callable[[int, int, str], None]
TrainingRecord = Tuple[Sequence[float], Sequence[float]]


@dataclass(frozen=True)
class NetworkConfig:
    """网络结构与训练超参数"""
    layer_sizes: Tuple[int, ...] = PRESETS["paper52"]
    learning_rate: float = 0.2
    momentum: float = 0.5
    max_epochs: int = 5000
    target_mse: float = 0.01
    seed: int = 0
    init_half_range: float = 0.5
    use_bias: bool = False

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)

        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError(f"layer_sizes 至少两层且每层 ≥ 1，当前为 {list(sizes)}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate 必须为正数，当前为 {self.learning_rate}")
        if not (math.isfinite(self.momentum) and 0 <= self.momentum < 1):
            raise ConfigError(f"momentum 必须位于 [0, 1)，当前为 {self.momentum}")
        if int(self.max_epochs) != self.max_epochs or self.max_epochs < 0:
            raise ConfigError(f"max_epochs 必须为非负整数，当前为 {self.max_epochs}")
        if not (math.isfinite(self.target_mse) and self.target_mse >= 0):
            raise ConfigError(f"target_mse 必须 ≥ 0，当前为 {self.target_mse}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed 必须为非负整数，当前为 {self.seed}")
        # 0 表示全零初始化
        if not (math.isfinite(self.init_half_range) and self.init_half_range >= 0):
            raise ConfigError(f"init_half_range 必须 ≥ 0，当前为 {self.init_half_range}")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "NetworkConfig":
        """按预设名构造配置，其余字段可覆盖"""
        if name not in PRESETS:
            raise ConfigError(f"未知的网络预设: {name}，可选值: {', '.join(PRESETS)}")
        return cls(layer_sizes=PRESETS[name], **overrides)


@dataclass(eq=False)
class Network:
    """
    分层权重矩阵 + 超参数

    prev_delta_w 保存上一次实际施加的权重改变量 w(n) − w(n−1)，构造时全零。
    """
    config: NetworkConfig
    weights: List[np.ndarray]
    prev_delta_w: Optional[List[np.ndarray]] = None

    def __post_init__(self):
        self.weights = [np.array(w, dtype=np.float64) for w in self.weights]
        if self.prev_delta_w is None:
            self.prev_delta_w = [np.zeros_like(w) for w in self.weights]
        else:
            self.prev_delta_w = [np.array(d, dtype=np.float64) for d in self.prev_delta_w]

        expected = expected_weight_shapes(self.config)
        if len(self.weights) != len(expected) or len(self.prev_delta_w) != len(expected):
            raise ShapeError(f"权重矩阵数量应为 {len(expected)}，实际为 {len(self.weights)}")
        for l, shape in enumerate(expected):
            if self.weights[l].shape != shape or self.prev_delta_w[l].shape != shape:
                raise ShapeError(f"第 {l} 组权重形状应为 {shape}，实际为 {self.weights[l].shape}")
            if not np.all(np.isfinite(self.weights[l])):
                raise DataError(f"第 {l} 组权重包含非有限值")

    @property
    def input_size(self) -> int:
        return self.config.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.config.layer_sizes[-1]

    def copy(self) -> "Network":
        return Network(
            config=self.config,
            weights=[w.copy() for w in self.weights],
            prev_delta_w=[d.copy() for d in self.prev_delta_w],
        )


@dataclass(eq=False)
class ForwardTrace:
    """一次前向传播的记录：activations 含输入层，weighted_inputs 只含非输入层"""
    activations: List[np.ndarray]
    weighted_inputs: List[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


@dataclass
class TrainReport:
    epochs_run: int
    mse_history: List[float] = field(default_factory=list)
    converged: bool = False
    final_mse: float = float("nan")


def expected_weight_shapes(config: NetworkConfig) -> List[Tuple[int, int]]:
    bias = 1 if config.use_bias else 0
    sizes = config.layer_sizes
    return [(n_out, n_in + bias) for n_in, n_out in zip(sizes[:-1], sizes[1:])]


def sigmoid(z):
    """Logistic 传递函数 1/(1+e^(−z))，标量返回 float，数组逐元素计算"""
    z_arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z_arr)):
        raise ValueError("sigmoid 的输入必须是有限实数")
    out = np.clip(expit(z_arr), _SIGMOID_LOW, _SIGMOID_HIGH)
    return float(out) if out.ndim == 0 else out


def sigmoid_derivative(z):
    s = sigmoid(z)
    return s * (1.0 - s)


def _with_bias(o: np.ndarray, use_bias: bool) -> np.ndarray:
    return np.append(o, 1.0) if use_bias else o


def _as_vector(values, name: str, size: int) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != size:
        raise ShapeError(f"{name} 长度应为 {size}，实际形状为 {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise DataError(f"{name} 包含非有限值")
    return vec


def _forward_arrays(net: Network, x: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    use_bias = net.config.use_bias
    activations = [x]
    weighted_inputs = []
    o = x
    for w in net.weights:
        z = w @ _with_bias(o, use_bias)
        o = np.clip(expit(z), _SIGMOID_LOW, _SIGMOID_HIGH)
        weighted_inputs.append(z)
        activations.append(o)
    return activations, weighted_inputs


def forward(net: Network, input_vector: Sequence[float]) -> ForwardTrace:
    """阶段一：前向传播，不修改网络"""
    x = _as_vector(input_vector, "输入向量", net.input_size)
    activations, weighted_inputs = _forward_arrays(net, x)
    return ForwardTrace(activations=activations, weighted_inputs=weighted_inputs)


def classify(net: Network, input_vector: Sequence[float]) -> int:
    """返回输出层最大激活值的下标"""
    return int(np.argmax(forward(net, input_vector).output))


def output_delta(desired, actual):
    """输出层斜率 δ = (d − o)·o·(1 − o)"""
    return (desired - actual) * actual * (1.0 - actual)


def hidden_delta(activation: float, downstream_deltas: Sequence[float], downstream_weights: Sequence[float]) -> float:
    """隐藏层斜率 δ_j = o_j·(1 − o_j)·Σ_k δ_k·w_kj"""
    deltas = np.asarray(downstream_deltas, dtype=np.float64)
    weights = np.asarray(downstream_weights, dtype=np.float64)
    if deltas.shape != weights.shape:
        raise ShapeError(f"下游 δ 与权重长度不一致: {deltas.shape} vs {weights.shape}")
    return float(activation * (1.0 - activation) * np.dot(deltas, weights))


def _backward(net: Network, activations: List[np.ndarray], target: np.ndarray) -> List[np.ndarray]:
    sizes = net.config.layer_sizes
    n_layers = len(net.weights)
    deltas: List[np.ndarray] = [None] * n_layers
    deltas[-1] = output_delta(target, activations[-1])
    for l in range(n_layers - 2, -1, -1):
        # 去掉偏置列，偏置单元不向下游传播误差
        w_next = net.weights[l + 1][:, :sizes[l + 1]]
        o = activations[l + 1]
        deltas[l] = o * (1.0 - o) * (w_next.T @ deltas[l + 1])
    return deltas


def compute_deltas(net: Network, trace: ForwardTrace, target: Sequence[float]) -> List[np.ndarray]:
    """阶段二前半：按输出层、隐藏层顺序求每个非输入层的 δ 向量"""
    t = _as_vector(target, "目标向量", net.output_size)
    if len(trace.activations) != len(net.weights) + 1:
        raise ShapeError("前向记录的层数与网络不一致")
    return _backward(net, trace.activations, t)


def _apply_update(net: Network, activations: List[np.ndarray], deltas: List[np.ndarray]) -> None:
    cfg = net.config
    if len(deltas) != len(net.weights):
        raise ShapeError(f"δ 的层数应为 {len(net.weights)}，实际为 {len(deltas)}")
    for l, w in enumerate(net.weights):
        inputs = _with_bias(activations[l], cfg.use_bias)
        delta = np.asarray(deltas[l], dtype=np.float64)
        if delta.shape != (w.shape[0],):
            raise ShapeError(f"第 {l} 层 δ 长度应为 {w.shape[0]}，实际形状为 {delta.shape}")
        step = cfg.momentum * net.prev_delta_w[l] + cfg.learning_rate * np.outer(delta, inputs)
        w += step
        net.prev_delta_w[l] = step


def update_weights(net: Network, trace: ForwardTrace, deltas: List[np.ndarray]) -> Network:
    """
    阶段二后半：权重更新，返回新网络，原网络不变

    w ← w + momentum·(w − w_prev) + learning_rate·δ_j·o_i，并把本次改变量记为新的 prev_delta_w。
    """
    updated = net.copy()
    _apply_update(updated, trace.activations, deltas)
    return updated


def init_weights(config: NetworkConfig) -> Network:
    """按种子在 [−init_half_range, +init_half_range] 内均匀初始化权重"""
    rng = np.random.default_rng(config.seed)
    half = config.init_half_range
    weights = []
    for shape in expected_weight_shapes(config):
        if half == 0:
            weights.append(np.zeros(shape))
        else:
            weights.append(rng.uniform(-half, half, size=shape))
    return Network(config=config, weights=weights)


def _batch_outputs(net: Network, inputs: np.ndarray) -> np.ndarray:
    o = inputs
    for w in net.weights:
        if net.config.use_bias:
            o = np.hstack([o, np.ones((o.shape[0], 1))])
        o = np.clip(expit(o @ w.T), _SIGMOID_LOW, _SIGMOID_HIGH)
    return o


def mean_squared_error(net: Network, inputs: np.ndarray, targets: np.ndarray) -> float:
    """全部样本、全部输出单元上 (d − o)² 的平均"""
    outputs = _batch_outputs(net, inputs)
    return float(np.mean((targets - outputs) ** 2))


def _stack_records(net: Network, records: Sequence[TrainingRecord]) -> Tuple[np.ndarray, np.ndarray]:
    inputs = np.empty((len(records), net.input_size))
    targets = np.empty((len(records), net.output_size))
    for n, (x, t) in enumerate(records):
        inputs[n] = _as_vector(x, f"第 {n} 条记录的输入", net.input_size)
        targets[n] = _as_vector(t, f"第 {n} 条记录的目标", net.output_size)
    return inputs, targets


class _OnlineStep:
    """
    逐样本更新的工作区

    各层激活、δ 和权重改变量的缓冲在构造时一次分配，step() 内全部原地计算，不再做形状校验。
    启用偏置时 acts[l] 末尾固定为 1。
    """

    def __init__(self, net: Network):
        cfg = net.config
        bias = 1 if cfg.use_bias else 0
        self.net = net
        self.sizes = cfg.layer_sizes
        self.learning_rate = cfg.learning_rate
        self.momentum = cfg.momentum
        self.acts = [np.ones(n + bias) for n in self.sizes[:-1]] + [np.empty(self.sizes[-1])]
        self.deltas = [np.empty(n) for n in self.sizes[1:]]
        self.slopes = [np.empty(n) for n in self.sizes[1:]]
        self.grads = [np.empty_like(w) for w in net.weights]

    def step(self, x: np.ndarray, t: np.ndarray) -> None:
        net, sizes, acts, deltas, slopes = self.net, self.sizes, self.acts, self.deltas, self.slopes
        n_layers = len(net.weights)

        acts[0][:sizes[0]] = x
        for l, w in enumerate(net.weights):
            o = acts[l + 1][:sizes[l + 1]]
            np.dot(w, acts[l], out=o)
            expit(o, out=o)
            np.clip(o, _SIGMOID_LOW, _SIGMOID_HIGH, out=o)

        # δ 全部求出后再改权重
        o = acts[-1]
        np.subtract(t, o, out=deltas[-1])
        np.subtract(1.0, o, out=slopes[-1])
        slopes[-1] *= o
        deltas[-1] *= slopes[-1]
        for l in range(n_layers - 2, -1, -1):
            n = sizes[l + 1]
            o = acts[l + 1][:n]
            np.dot(net.weights[l + 1][:, :n].T, deltas[l + 1], out=deltas[l])
            np.subtract(1.0, o, out=slopes[l])
            slopes[l] *= o
            deltas[l] *= slopes[l]

        for l, w in enumerate(net.weights):
            step = net.prev_delta_w[l]
            grad = self.grads[l]
            np.outer(deltas[l], acts[l], out=grad)
            grad *= self.learning_rate
            step *= self.momentum
            step += grad
            w += step


def train(net: Network, records: Sequence[TrainingRecord],
          progress_callback: Optional[ProgressCallback] = None,
          show_progress: bool = False) -> Tuple[Network, TrainReport]:
    """
    逐样本反向传播训练，重复阶段一、二直到 epoch MSE ≤ target_mse 或达到 max_epochs

    Args:
        net: 初始网络（不会被修改）
        records: (输入向量, 目标向量) 列表
        progress_callback: 每个 epoch 结束时回调 (当前 epoch, 最大 epoch, 消息)
        show_progress: 是否显示 tqdm 进度条

    Returns:
        (训练后的网络, 训练报告)
    """
    if not records:
        raise EmptyDataError("训练数据为空")
    inputs, targets = _stack_records(net, records)
    cfg = net.config
    work = net.copy()
    online = _OnlineStep(work)
    # 与 init_weights 使用不同的随机流
    rng = np.random.default_rng([cfg.seed, 1])

    history: List[float] = []
    final_mse = mean_squared_error(work, inputs, targets)
    converged = cfg.max_epochs == 0 and final_mse <= cfg.target_mse

    logger.info(f"开始训练: 拓扑 {list(cfg.layer_sizes)}，样本 {len(records)} 条，"
                f"学习率 {cfg.learning_rate}，动量 {cfg.momentum}，最多 {cfg.max_epochs} 个 epoch")

    epochs = tqdm(range(cfg.max_epochs), desc="训练", unit="epoch", disable=not show_progress)
    for epoch in epochs:
        for idx in rng.permutation(len(records)):
            online.step(inputs[idx], targets[idx])

        mse = mean_squared_error(work, inputs, targets)
        if not math.isfinite(mse):
            raise TrainingError(f"第 {epoch + 1} 个 epoch 的 MSE 非有限: {mse}")
        history.append(mse)
        final_mse = mse
        logger.debug(f"epoch {epoch + 1}: MSE={mse:.6f}")
        if progress_callback:
            progress_callback(epoch + 1, cfg.max_epochs, f"epoch {epoch + 1} MSE={mse:.6f}")
        if mse <= cfg.target_mse:
            converged = True
            break

    report = TrainReport(epochs_run=len(history), mse_history=history,
                         converged=converged, final_mse=final_mse)
    if converged:
        logger.info(f"训练收敛: {report.epochs_run} 个 epoch，MSE={final_mse:.6f}")
    else:
        logger.warning(f"训练未达到目标 MSE {cfg.target_mse}: {report.epochs_run} 个 epoch，MSE={final_mse:.6f}")
    return work, report


def record_error(net: Network, input_vector: Sequence[float], target: Sequence[float]) -> float:
    """单条记录的误差 E = ½·Σ(d − o)²，δ 的定义与之对应"""
    t = _as_vector(target, "目标向量", net.output_size)
    o = forward(net, input_vector).output
    return float(0.5 * np.sum((t - o) ** 2))


def backprop_gradients(net: Network, input_vector: Sequence[float], target: Sequence[float]) -> List[np.ndarray]:
    """反向传播得到的 ∂E/∂w_ji = −δ_j·o_i（不含动量）"""
    trace = forward(net, input_vector)
    deltas = compute_deltas(net, trace, target)
    use_bias = net.config.use_bias
    return [-np.outer(d, _with_bias(a, use_bias)) for d, a in zip(deltas, trace.activations[:-1])]


GradientFn = Callable[[Network, Sequence[float], Sequence[float]], List[np.ndarray]]


def gradient_check(net: Network, record: TrainingRecord, epsilon: float = 1e-5,
                   tolerance: float = 1e-4, gradient_fn: Optional[GradientFn] = None) -> bool:
    """
    用中心差分校验反向传播梯度

    每个权重满足 |解析 − 数值| ≤ max(tolerance·max(|解析|, |数值|), 1e-8) 时返回 True。
    gradient_fn 默认为 backprop_gradients，可替换以做反例校验。
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon 必须为正数，当前为 {epsilon}")
    x, t = record
    analytic = (gradient_fn or backprop_gradients)(net, x, t)
    shifted = net.copy()

    for l, w in enumerate(shifted.weights):
        for j, i in np.ndindex(*w.shape):
            original = w[j, i]
            w[j, i] = original + epsilon
            plus = record_error(shifted, x, t)
            w[j, i] = original - epsilon
            minus = record_error(shifted, x, t)
            w[j, i] = original

            numeric = (plus - minus) / (2.0 * epsilon)
            a = float(analytic[l][j, i])
            if abs(a - numeric) > max(tolerance * max(abs(a), abs(numeric)), 1e-8):
                logger.debug(f"梯度校验失败: 层 {l} w[{j},{i}] 解析 {a:.3e} 数值 {numeric:.3e}")
                return False
    return True
