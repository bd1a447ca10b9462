"""Small CNN for face / non-face decisions on feature images.

conv1 100@5x5/4 ReLU -> maxpool 2x2/2 -> conv2 100@5x5/1 ReLU -> fc1 500 ReLU
(dropout 0.25) -> fc2 1 sigmoid. Valid padding and floor pooling throughout.
Tensors are NHWC; conv weights are (out, kh, kw, in), fc weights (out, in).
"""
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyDataset, FormatError, ShapeMismatch

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")
EXPECTED_PARAMS = {64: 708_701, 128: 6_308_701}
LOSS_EPS = 1e-7
KERNEL, STRIDE1, POOL = 5, 4, 2

HFCN_MAGIC = b"HFCN"
HFCN_VERSION = 1
SIZE_CODES = {64: 0, 128: 1}


def layer_shapes(input_size):
    """Spatial sizes after conv1, pool and conv2 for a square input."""
    c1 = (input_size - KERNEL) // STRIDE1 + 1
    p = c1 // POOL
    c2 = p - KERNEL + 1
    if c2 < 1:
        raise ShapeMismatch(f"input size {input_size} too small for the network")
    return c1, p, c2


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 3
    seed: int = 0
    dropout_rate: float = 0.25
    # the update direction is the gradient of the summed mini-batch loss
    loss_reduction: str = "sum"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be at least 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.loss_reduction not in ("sum", "mean"):
            raise ValueError("loss_reduction must be 'sum' or 'mean'")


@dataclass
class History:
    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    stopped_early: bool = False


class CnnModel:
    def __init__(self, input_size=64, filters=100, fc_units=500, seed=0,
                 dtype=np.float32, qp=0, params=None, dropout_rate=0.25):
        self.input_size = int(input_size)
        self.filters = int(filters)
        self.fc_units = int(fc_units)
        self.qp = int(qp)
        self.dropout_rate = float(dropout_rate)
        self.dtype = np.dtype(dtype)
        _, _, c2 = layer_shapes(self.input_size)
        self.flat_dim = c2 * c2 * self.filters
        shapes = self.param_shapes()
        if params is None:
            params = _init_params(shapes, seed)
        self.params = {}
        for name in PARAM_NAMES:
            arr = np.asarray(params[name])
            if arr.shape != shapes[name]:
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shapes[name]}")
            self.params[name] = arr.astype(self.dtype, copy=True)
        if self.is_canonical():
            n = self.num_params()
            assert n == EXPECTED_PARAMS[self.input_size], f"parameter count {n}"

    def param_shapes(self):
        f, u = self.filters, self.fc_units
        return {
            "conv1_w": (f, KERNEL, KERNEL, 3), "conv1_b": (f,),
            "conv2_w": (f, KERNEL, KERNEL, f), "conv2_b": (f,),
            "fc1_w": (u, self.flat_dim), "fc1_b": (u,),
            "fc2_w": (1, u), "fc2_b": (1,),
        }

    def is_canonical(self):
        return self.filters == 100 and self.fc_units == 500 and self.input_size in EXPECTED_PARAMS

    def num_params(self):
        return sum(int(np.prod(p.shape)) for p in self.params.values())

    def copy(self, dtype=None):
        return CnnModel(self.input_size, self.filters, self.fc_units, dtype=dtype or self.dtype,
                        qp=self.qp, params=self.params, dropout_rate=self.dropout_rate)

    def get_state(self):
        return {k: v.copy() for k, v in self.params.items()}

    def set_state(self, state):
        for k in PARAM_NAMES:
            self.params[k][...] = state[k]

    # forward / backward

    def _check_input(self, x):
        x = np.asarray(x)
        if x.ndim == 3:
            x = x[None]
        if x.ndim != 4 or x.shape[1:] != (self.input_size, self.input_size, 3):
            raise ShapeMismatch(f"expected (N, {self.input_size}, {self.input_size}, 3), got {x.shape}")
        return x.astype(self.dtype, copy=False)

    def forward(self, x, train_mode=False, rng=None, cache=False):
        """Probabilities for a batch (or one image). With cache=True also
        returns the activations needed by :meth:`backward`."""
        x = self._check_input(x)
        P = self.params
        cols1 = _im2col(x, KERNEL, STRIDE1)
        a1 = _conv_apply(cols1, P["conv1_w"], P["conv1_b"])
        r1 = np.maximum(a1, 0)
        p1, arg1 = _maxpool(r1)
        cols2 = _im2col(p1, KERNEL, 1)
        a2 = _conv_apply(cols2, P["conv2_w"], P["conv2_b"])
        r2 = np.maximum(a2, 0)
        flat = r2.reshape(len(x), -1)
        h = flat @ P["fc1_w"].T + P["fc1_b"]
        hr = np.maximum(h, 0)
        mask = None
        if train_mode and self.dropout_rate > 0:
            if rng is None:
                raise ValueError("train_mode forward needs an rng for dropout")
            keep = 1.0 - self.dropout_rate
            mask = (rng.random(hr.shape) >= self.dropout_rate).astype(self.dtype) / self.dtype.type(keep)
            hd = hr * mask
        else:
            hd = hr
        z = (hd @ P["fc2_w"].T + P["fc2_b"])[:, 0]
        prob = _sigmoid(z)
        if not cache:
            return prob
        return prob, dict(x_shape=x.shape, cols1=cols1, a1=a1, r1_shape=r1.shape, arg1=arg1,
                          p1_shape=p1.shape, cols2=cols2, a2=a2, flat=flat, h=h, mask=mask,
                          hd=hd, prob=prob)

    def backward(self, cache, y, reduction="sum"):
        """Gradients of the BCE loss (summed or averaged over the batch)."""
        P = self.params
        y = np.asarray(y, dtype=self.dtype).reshape(-1)
        n = len(y)
        dz = cache["prob"] - y
        if reduction == "mean":
            dz = dz / n
        dz = dz[:, None]
        g = {}
        g["fc2_w"] = dz.T @ cache["hd"]
        g["fc2_b"] = dz.sum(0)
        dhd = dz @ P["fc2_w"]
        if cache["mask"] is not None:
            dhd = dhd * cache["mask"]
        dh = dhd * (cache["h"] > 0)
        g["fc1_w"] = dh.T @ cache["flat"]
        g["fc1_b"] = dh.sum(0)
        dflat = dh @ P["fc1_w"]
        da2 = dflat.reshape(cache["a2"].shape) * (cache["a2"] > 0)
        g["conv2_w"], g["conv2_b"], dcols2 = _conv_grads(da2, cache["cols2"], P["conv2_w"], True)
        dp1 = _col2im(dcols2, cache["p1_shape"], KERNEL, 1)
        dr1 = _maxpool_backward(dp1, cache["arg1"], cache["r1_shape"])
        da1 = dr1 * (cache["a1"] > 0)
        g["conv1_w"], g["conv1_b"], _ = _conv_grads(da1, cache["cols1"], P["conv1_w"], False)
        return {k: g[k].reshape(P[k].shape).astype(self.dtype, copy=False) for k in PARAM_NAMES}


def _init_params(shapes, seed):
    rng = np.random.default_rng(seed)
    params = {}
    for name in PARAM_NAMES:
        wname = name[:-1] + "w"
        fan_in = int(np.prod(shapes[wname][1:]))
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shapes[name])
    return params


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _im2col(x, k, stride):
    n, hgt, wid, c = x.shape
    oh = (hgt - k) // stride + 1
    ow = (wid - k) // stride + 1
    win = sliding_window_view(x, (k, k), axis=(1, 2))[:, ::stride, ::stride][:, :oh, :ow]
    # (n, oh, ow, c, kh, kw) -> rows ordered (kh, kw, c) to match the weights
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n, oh, ow, k * k * c)


def _conv_apply(cols, w, b):
    return cols @ w.reshape(len(w), -1).T + b


def _conv_grads(dout, cols, w, need_input):
    f = len(w)
    d2 = dout.reshape(-1, f)
    c2 = cols.reshape(-1, cols.shape[-1])
    dw = d2.T @ c2
    db = d2.sum(0)
    dcols = (d2 @ w.reshape(f, -1)).reshape(cols.shape) if need_input else None
    return dw, db, dcols


def _col2im(dcols, x_shape, k, stride):
    n, oh, ow, _ = dcols.shape
    c = x_shape[-1]
    d = dcols.reshape(n, oh, ow, k, k, c)
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, i:i + stride * (oh - 1) + 1:stride, j:j + stride * (ow - 1) + 1:stride, :] += d[:, :, :, i, j, :]
    return dx


def _maxpool(x):
    n, hgt, wid, c = x.shape
    ph, pw = hgt // POOL, wid // POOL
    xt = x[:, :ph * POOL, :pw * POOL]
    win = xt.reshape(n, ph, POOL, pw, POOL, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ph, pw, c, POOL * POOL)
    # ties route the gradient to the first maximum only
    arg = win.argmax(-1)
    out = np.take_along_axis(win, arg[..., None], -1)[..., 0]
    return out, arg


def _maxpool_backward(dout, arg, x_shape):
    n, hgt, wid, c = x_shape
    ph, pw = dout.shape[1:3]
    dwin = np.zeros((n, ph, pw, c, POOL * POOL), dtype=dout.dtype)
    np.put_along_axis(dwin, arg[..., None], dout[..., None], -1)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :ph * POOL, :pw * POOL] = (
        dwin.reshape(n, ph, pw, c, POOL, POOL).transpose(0, 1, 4, 2, 5, 3).reshape(n, ph * POOL, pw * POOL, c))
    return dx


def build_model(input_size, seed=0, qp=0):
    """The canonical network; its parameter count is asserted at construction."""
    if input_size not in EXPECTED_PARAMS:
        raise ShapeMismatch(f"input size must be 64 or 128, got {input_size}")
    return CnnModel(input_size, seed=seed, qp=qp)


def forward(model, x, train_mode=False, rng=None):
    return model.forward(x, train_mode=train_mode, rng=rng)


def loss(p, label):
    """Binary cross-entropy with p clamped to [eps, 1 - eps]; works elementwise."""
    p = np.clip(np.asarray(p, dtype=np.float64), LOSS_EPS, 1.0 - LOSS_EPS)
    y = np.asarray(label, dtype=np.float64)
    out = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(out) if out.ndim == 0 else out


def backward(model, x, label, train_mode=False, rng=None, reduction="sum"):
    _, cache = model.forward(x, train_mode=train_mode, rng=rng, cache=True)
    return model.backward(cache, np.atleast_1d(label), reduction=reduction)


def predict_proba(model, x, batch_size=256):
    x = np.asarray(x)
    single = x.ndim == 3
    if single:
        x = x[None]
    out = [model.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)]
    prob = np.concatenate(out) if out else np.zeros(0, dtype=model.dtype)
    return prob[0] if single else prob


def predict(model, x, threshold=0.5):
    """True (face) where p >= threshold."""
    p = predict_proba(model, x)
    return p >= threshold


def mean_loss(model, x, y, batch_size=256):
    p = predict_proba(model, x, batch_size)
    return float(np.mean(loss(p, y)))


class EarlyStopping:
    """Stop once the validation loss has not improved for ``patience`` epochs."""

    def __init__(self, patience):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.bad_epochs = 0

    def update(self, epoch, val_loss):
        """Record one epoch; returns (improved, should_stop)."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.bad_epochs = 0
            return True, False
        self.bad_epochs += 1
        return False, self.bad_epochs >= self.patience


def train(model, train_x, train_y, val_x, val_y, cfg, val_loss_fn=None, log=None):
    """Mini-batch SGD with early stopping; returns (best model, History).

    ``val_loss_fn(model, epoch)`` replaces the validation loss computation
    when given (used to exercise the stopping rule directly).
    """
    train_x = np.asarray(train_x)
    train_y = np.asarray(train_y)
    if len(train_x) == 0:
        raise EmptyDataset("training set is empty")
    if val_loss_fn is None and len(val_x) == 0:
        raise EmptyDataset("validation set is empty")
    model.dropout_rate = cfg.dropout_rate
    seq = np.random.SeedSequence(cfg.seed)
    order_rng, drop_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    lr = model.dtype.type(cfg.learning_rate)
    stopper = EarlyStopping(cfg.patience)
    hist = History()
    best_state = model.get_state()
    n = len(train_x)
    for epoch in range(1, cfg.max_epochs + 1):
        perm = order_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb = train_x[idx].astype(model.dtype, copy=False)
            prob, cache = model.forward(xb, train_mode=True, rng=drop_rng, cache=True)
            total += float(np.sum(loss(prob, train_y[idx])))
            grads = model.backward(cache, train_y[idx], reduction=cfg.loss_reduction)
            for k in PARAM_NAMES:
                model.params[k] -= lr * grads[k]
        train_loss = total / n
        if val_loss_fn is not None:
            val_loss = float(val_loss_fn(model, epoch))
        else:
            val_loss = mean_loss(model, val_x, val_y)
        hist.epochs.append((epoch, train_loss, val_loss))
        if log is not None:
            log(f"epoch {epoch} train_loss {train_loss:.6f} val_loss {val_loss:.6f}")
        improved, stop = stopper.update(epoch, val_loss)
        if improved:
            best_state = model.get_state()
        if stop:
            hist.stopped_early = True
            break
    hist.best_epoch = stopper.best_epoch
    model.set_state(best_state)
    return model, hist


# serialization

def model_bytes(model):
    if model.input_size not in SIZE_CODES:
        raise FormatError(f"input size {model.input_size} has no HFCN size code")
    out = [HFCN_MAGIC, struct.pack("<BBB", HFCN_VERSION, SIZE_CODES[model.input_size], model.qp)]
    out.append(struct.pack("<I", len(PARAM_NAMES)))
    for name in PARAM_NAMES:
        shape = model.params[name].shape
        out.append(struct.pack("<I", len(shape)) + struct.pack(f"<{len(shape)}I", *shape))
    for name in PARAM_NAMES:
        out.append(np.ascontiguousarray(model.params[name], dtype="<f4").tobytes())
    return b"".join(out)


def parse_model(data):
    if data[:4] != HFCN_MAGIC:
        raise FormatError(f"bad HFCN magic {bytes(data[:4])!r}")
    try:
        version, code, qp = struct.unpack_from("<BBB", data, 4)
        if version != HFCN_VERSION:
            raise FormatError(f"unsupported HFCN version {version}")
        sizes = {v: k for k, v in SIZE_CODES.items()}
        if code not in sizes:
            raise FormatError(f"unknown input size code {code}")
        pos = 7
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if count != len(PARAM_NAMES):
            raise FormatError(f"expected {len(PARAM_NAMES)} tensors, found {count}")
        shapes = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", data, pos)
            pos += 4
            shapes.append(struct.unpack_from(f"<{ndim}I", data, pos))
            pos += 4 * ndim
        params = {}
        for name, shape in zip(PARAM_NAMES, shapes):
            n = int(np.prod(shape))
            params[name] = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(shape)
            pos += 4 * n
    except struct.error as exc:
        raise FormatError(f"truncated HFCN data: {exc}") from None
    except ValueError as exc:
        raise FormatError(f"malformed HFCN data: {exc}") from None
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes in HFCN data")
    filters = params["conv1_w"].shape[0]
    fc_units = params["fc1_w"].shape[0]
    return CnnModel(sizes[code], filters, fc_units, qp=qp, params=params)


def save_model(path, model):
    with open(path, "wb") as fh:
        fh.write(model_bytes(model))


def load_model(path):
    with open(path, "rb") as fh:
        return parse_model(fh.read())


# gradient checking

def fd_step(value, rel_step=1e-5, floor=0.1):
    """Central-difference step relative to the parameter value; near-zero
    values use rel_step * floor so the step never vanishes."""
    return rel_step * max(abs(value), floor)


def relative_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _batch_loss(prob, y):
    return float(np.sum(loss(prob, y)))


class _PrefixCache:
    """Cached float64 forward pass for finite differences.

    A perturbed parameter is re-evaluated only where it can have an effect:
    one conv1 filter changes one pooled channel, one conv2 filter changes
    one feature-map channel, one fc1 row changes one hidden unit. Everything
    downstream of that point is recomputed. The ReLU and max-pool switching
    pattern is compared against the base pass so that kink crossings can be
    detected.
    """

    def __init__(self, model, x, y):
        self.m = model
        self.y = y
        self.n = len(x)
        P = model.params
        self.cols1 = _im2col(x, KERNEL, STRIDE1)
        self.a1 = _conv_apply(self.cols1, P["conv1_w"], P["conv1_b"])
        self.p1, self.arg1 = _maxpool(np.maximum(self.a1, 0))
        self.cols2 = _im2col(self.p1, KERNEL, 1)
        self.a2 = _conv_apply(self.cols2, P["conv2_w"], P["conv2_b"])
        self.flat = np.maximum(self.a2, 0).reshape(self.n, -1)
        self.h = self.flat @ P["fc1_w"].T + P["fc1_b"]
        self.hr = np.maximum(self.h, 0)

    def _tail(self, hr):
        P = self.m.params
        z = (hr @ P["fc2_w"].T + P["fc2_b"])[:, 0]
        return _batch_loss(_sigmoid(z), self.y)

    def _from_hidden(self, h):
        return self._tail(np.maximum(h, 0)), np.array_equal(h > 0, self.h > 0)

    def _from_feature_channel(self, g, a2_g):
        """Loss after replacing conv2 output channel g."""
        P = self.m.params
        f = self.m.filters
        old = np.maximum(self.a2[..., g], 0).reshape(self.n, -1)
        new = np.maximum(a2_g, 0).reshape(self.n, -1)
        # flat index of (row, col, g) is (row * c2 + col) * f + g
        cols = np.arange(old.shape[1]) * f + g
        h = self.h + (new - old) @ P["fc1_w"][:, cols].T
        loss, smooth = self._from_hidden(h)
        return loss, smooth and np.array_equal(a2_g > 0, self.a2[..., g] > 0)

    def loss_for(self, name, index):
        """(loss, smooth) with the current value of parameter ``name[index]``."""
        P = self.m.params
        if name.startswith("fc2"):
            return self._tail(self.hr), True
        if name.startswith("fc1"):
            j = index // self.flat.shape[1] if name == "fc1_w" else index
            h = self.h.copy()
            h[:, j] = self.flat @ P["fc1_w"][j] + P["fc1_b"][j]
            return self._from_hidden(h)
        if name.startswith("conv2"):
            g = index // (KERNEL * KERNEL * self.m.filters) if name == "conv2_w" else index
            a2_g = self.cols2 @ P["conv2_w"][g].reshape(-1) + P["conv2_b"][g]
            return self._from_feature_channel(g, a2_g)
        # conv1: one input channel of conv2 changes, so every conv2 output moves
        c = index // (KERNEL * KERNEL * 3) if name == "conv1_w" else index
        a1_c = self.cols1 @ P["conv1_w"][c].reshape(-1) + P["conv1_b"][c]
        p1_c, arg_c = _maxpool(np.maximum(a1_c, 0)[..., None])
        smooth = np.array_equal(a1_c > 0, self.a1[..., c] > 0) and np.array_equal(arg_c[..., 0], self.arg1[..., c])
        delta = _im2col(p1_c - self.p1[..., c:c + 1], KERNEL, 1)
        a2 = self.a2 + delta @ P["conv2_w"][:, :, :, c].reshape(len(P["conv2_w"]), -1).T
        flat = np.maximum(a2, 0).reshape(self.n, -1)
        h = flat @ P["fc1_w"].T + P["fc1_b"]
        loss, smooth_h = self._from_hidden(h)
        return loss, smooth and smooth_h and np.array_equal(a2 > 0, self.a2 > 0)


def gradient_check(model, x, y, indices, rel_step=1e-5, tol=1e-3, max_shrink=4):
    """Compare backprop gradients with central differences (float64, no dropout).

    ``indices`` maps parameter name to a sequence of flat indices to test.
    A difference quotient is only valid where the loss is smooth, so when
    a step crosses a ReLU or max-pool switch it is shrunk tenfold and
    retried (at most ``max_shrink`` times).
    Returns a list of (name, flat_index, analytic, numeric, rel_error, ok).
    """
    m = model.copy(dtype=np.float64)
    x = m._check_input(x)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    grads = m.backward(m.forward(x, cache=True)[1], y, reduction="sum")
    cache = _PrefixCache(m, x, y)
    results = []
    for name, idxs in indices.items():
        flat_param = m.params[name].reshape(-1)
        flat_grad = grads[name].reshape(-1)
        for i in idxs:
            i = int(i)
            orig = float(flat_param[i])
            h = fd_step(orig, rel_step)
            for _ in range(max_shrink + 1):
                flat_param[i] = orig + h
                lp, smooth_p = cache.loss_for(name, i)
                flat_param[i] = orig - h
                lm, smooth_m = cache.loss_for(name, i)
                flat_param[i] = orig
                if smooth_p and smooth_m:
                    break
                h /= 10.0
            num = (lp - lm) / (2 * h)
            ana = float(flat_grad[i])
            err = relative_error(ana, num)
            results.append((name, i, ana, num, err, err <= tol))
    return results


def sampled_indices(model, per_layer, rng):
    """``per_layer`` random weights per layer plus every bias."""
    out = {}
    for name in PARAM_NAMES:
        size = model.params[name].size
        if name.endswith("_b") or size <= per_layer:
            out[name] = np.arange(size)
        else:
            out[name] = np.sort(rng.choice(size, per_layer, replace=False))
    return out


def all_indices(model):
    return {name: np.arange(model.params[name].size) for name in PARAM_NAMES}


def run_gradcheck_suite(seeds=(0, 1, 2, 3, 4), sizes=(64, 128), per_layer=200,
                        batch=2, log=None):
    """Sampled check on the full network and exhaustive check on a shrunken clone.

    Returns (all_ok, summary rows of (size, seed, variant, n_checked, max_rel_error)).
    """
    rows = []
    ok = True
    for size in sizes:
        for seed in seeds:
            rng = np.random.default_rng(seed)
            x = rng.random((batch, size, size, 3))
            y = (np.arange(batch) % 2).astype(np.float64)
            for variant, model in (
                ("full", CnnModel(size, seed=seed, dtype=np.float64)),
                ("shrunk", CnnModel(size, filters=10, fc_units=50, seed=seed, dtype=np.float64)),
            ):
                idx = sampled_indices(model, per_layer, rng) if variant == "full" else all_indices(model)
                res = gradient_check(model, x, y, idx)
                worst = max(r[4] for r in res)
                good = all(r[5] for r in res)
                ok = ok and good
                rows.append((size, seed, variant, len(res), worst))
                if log is not None:
                    log(f"size {size} seed {seed} {variant}: {len(res)} params, "
                        f"max rel error {worst:.2e} {'ok' if good else 'FAIL'}")
    return ok, rows
