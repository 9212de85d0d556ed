"""
Exact ReLU representations of the maximum m_d and the running maximum
(m_1(x_1), m_2(x_1, x_2), ..., m_d(x)).

Both are built as a sequence of "value rounds": each hidden layer reads the
current value vector v through an affine map, and the next value vector is
an affine function of that hidden layer. The affine maps between rounds are
fused, so a construction with r rounds has depth r + 1.

Pairwise maximum: max(a, b) = r(a - b) + r(b) - r(-b).
Carried value:    x = r(x) - r(-x).

Counts: max_net(d) has about 3d² parameters (first hidden layer ~1.5d
units wide, halving afterwards); cummax_net(d) has d - 1 hidden layers of
width 2d - 1, i.e. about 4d³ parameters.
"""
import numpy as np

from .calculus import identity_network
from .core import Layer, Network


def _rounds_to_network(rounds: list[tuple[np.ndarray, np.ndarray]], d: int) -> Network:
    """
    rounds[k] = (H, N): hidden = r(H @ v), next v = N @ hidden.
    The input is v itself, so the value maps chain as V_0 = I, V_{k+1} = N_k.
    """
    layers = []
    value_map = np.eye(d)
    for hidden, nxt in rounds:
        weights = hidden @ value_map
        layers.append(Layer(weights, np.zeros(weights.shape[0])))
        value_map = nxt
    layers.append(Layer(value_map, np.zeros(value_map.shape[0])))
    return Network(layers)


def _max_round(count: int) -> tuple[np.ndarray, np.ndarray]:
    pairs, rest = divmod(count, 2)
    width = 3 * pairs + 2 * rest
    hidden = np.zeros((width, count))
    nxt = np.zeros((pairs + rest, width))
    for j in range(pairs):
        a, b, row = 2 * j, 2 * j + 1, 3 * j
        hidden[row, a], hidden[row, b] = 1.0, -1.0      # r(a - b)
        hidden[row + 1, b] = 1.0                          # r(b)
        hidden[row + 2, b] = -1.0                         # r(-b)
        nxt[j, row:row + 3] = (1.0, 1.0, -1.0)
    if rest:
        row = 3 * pairs
        hidden[row, count - 1] = 1.0
        hidden[row + 1, count - 1] = -1.0
        nxt[pairs, row:row + 2] = (1.0, -1.0)
    return hidden, nxt


def max_net(d: int) -> Network:
    """Binary tree of pairwise maxima; an odd value out rides an identity pair."""
    if d < 1:
        raise ValueError(f"max_net needs d >= 1, got {d}")
    if d == 1:
        return identity_network(1)
    rounds = []
    count = d
    while count > 1:
        rounds.append(_max_round(count))
        count = rounds[-1][1].shape[0]
    return _rounds_to_network(rounds, d)


def _cummax_round(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Values before the round: (y_1, ..., y_{k-1}, x_k, ..., x_d) with y_{k-1}
    the running maximum; after it y_k = max(y_{k-1}, x_k) replaces x_k.
    """
    width = 2 * d - 1
    hidden = np.zeros((width, d))
    nxt = np.zeros((d, width))
    row = 0
    for j in range(d):
        if j == k - 2:
            # r(x_k - y), r(y), r(-y) give y itself and max(y, x_k)
            hidden[row, k - 1], hidden[row, j] = 1.0, -1.0
            hidden[row + 1, j] = 1.0
            hidden[row + 2, j] = -1.0
            nxt[j, row + 1:row + 3] = (1.0, -1.0)
            nxt[k - 1, row:row + 3] = (1.0, 1.0, -1.0)
            row += 3
        elif j == k - 1:
            continue
        else:
            hidden[row, j], hidden[row + 1, j] = 1.0, -1.0
            nxt[j, row:row + 2] = (1.0, -1.0)
            row += 2
    return hidden, nxt


def cummax_net(d: int) -> Network:
    if d < 1:
        raise ValueError(f"cummax_net needs d >= 1, got {d}")
    if d == 1:
        return identity_network(1)
    return _rounds_to_network([_cummax_round(d, k) for k in range(2, d + 1)], d)
