use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayD, ArrayViewMutD, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init::xavier_init, sigmoid, Mode, Real};
use crate::{Error, Result};

/// Fully connected layer over the flattened `channels × length` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Dense<T> {
    /// `[in × out]`
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

/// 1-D convolution, stride 1, symmetric zero padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Conv1d<T> {
    /// `[out_channels × in_channels × kernel]`
    pub weight: Array3<T>,
    pub bias: Array1<T>,
    pub padding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool1d {
    pub size: usize,
    pub stride: usize,
}

/// Single LSTM cell unrolled over the input length. Each time step consumes
/// one column `[batch × channels]` of the input; the layer emits the final
/// hidden state as `[batch × hidden × 1]`.
///
/// Gate blocks in `weight` and `bias` are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Lstm<T> {
    /// `[(input + hidden) × 4·hidden]`: input rows first, then recurrent rows.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub input_size: usize,
    pub hidden: usize,
}

/// Inverted dropout: survivors are scaled by `1 / (1 − p)` during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub enum Layer<T> {
    Dense(Dense<T>),
    Conv1d(Conv1d<T>),
    MaxPool1d(MaxPool1d),
    Lstm(Lstm<T>),
    Relu,
    Sigmoid,
    Dropout(Dropout),
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug)]
pub(crate) enum Cache<T> {
    Dense {
        input: Array2<T>,
        in_dim: (usize, usize, usize),
    },
    Conv {
        cols: Array2<T>,
        in_dim: (usize, usize, usize),
    },
    Pool {
        argmax: Vec<usize>,
        in_dim: (usize, usize, usize),
    },
    Lstm(LstmCache<T>),
    Relu {
        output: Array3<T>,
    },
    Sigmoid {
        output: Array3<T>,
    },
    Dropout {
        mask: Option<Array3<T>>,
    },
}

#[derive(Debug)]
pub(crate) struct LstmCache<T> {
    in_dim: (usize, usize, usize),
    steps: Vec<LstmStep<T>>,
}

#[derive(Debug)]
struct LstmStep<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    /// Activated gates `[batch × 4·hidden]`.
    gates: Array2<T>,
    tanh_c: Array2<T>,
}

impl<T: Real> Dense<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let weight = xavier_init(&[inputs, outputs], rng)
            .into_dimensionality()
            .unwrap();
        Dense {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, x: Array3<T>) -> (Array3<T>, Cache<T>) {
        let in_dim = x.dim();
        let batch = in_dim.0;
        let flat = into_matrix(x, batch, self.inputs());
        let mut out = flat.dot(&self.weight);
        out += &self.bias;
        let out = out
            .into_shape_with_order((batch, self.outputs(), 1))
            .unwrap();
        (
            out,
            Cache::Dense {
                input: flat,
                in_dim,
            },
        )
    }

    fn backward(
        &self,
        input: &Array2<T>,
        in_dim: (usize, usize, usize),
        dy: Array3<T>,
    ) -> (Array3<T>, Vec<ArrayD<T>>) {
        let dy = into_matrix(dy, in_dim.0, self.outputs());
        let dw = input.t().dot(&dy);
        let db = dy.sum_axis(Axis(0));
        let dx = dy
            .dot(&self.weight.t())
            .into_shape_with_order(in_dim)
            .unwrap();
        (dx, vec![dw.into_dyn(), db.into_dyn()])
    }
}

impl<T: Real> Conv1d<T> {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
        rng: &mut R,
    ) -> Self {
        let weight = xavier_init(&[out_channels, in_channels, kernel], rng)
            .into_dimensionality()
            .unwrap();
        Conv1d {
            weight,
            bias: Array1::zeros(out_channels),
            padding,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().1
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim().0
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim().2
    }

    fn out_len(&self, len: usize) -> Option<usize> {
        (len + 2 * self.padding)
            .checked_sub(self.kernel())
            .map(|v| v + 1)
    }

    fn weight_matrix(&self) -> ndarray::ArrayView2<'_, T> {
        let (co, ci, k) = self.weight.dim();
        self.weight
            .view()
            .into_shape_with_order((co, ci * k))
            .unwrap()
    }

    fn forward(&self, x: Array3<T>) -> (Array3<T>, Cache<T>) {
        let in_dim = x.dim();
        let (batch, cin, len) = in_dim;
        let k = self.kernel();
        let lout = self.out_len(len).expect("validated by shape propagation");
        let pad = self.padding as isize;
        // im2col: row (b, t), column (ci, j) holds x[b, ci, t + j - pad].
        let mut cols = Array2::<T>::zeros((batch * lout, cin * k));
        for b in 0..batch {
            for t in 0..lout {
                let mut row = cols.row_mut(b * lout + t);
                for ci in 0..cin {
                    for j in 0..k {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < len {
                            row[ci * k + j] = x[[b, ci, src as usize]];
                        }
                    }
                }
            }
        }
        let mut out = cols.dot(&self.weight_matrix().t());
        out += &self.bias;
        let out = out
            .into_shape_with_order((batch, lout, self.out_channels()))
            .unwrap()
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_owned();
        (out, Cache::Conv { cols, in_dim })
    }

    fn backward(
        &self,
        cols: &Array2<T>,
        in_dim: (usize, usize, usize),
        dy: Array3<T>,
    ) -> (Array3<T>, Vec<ArrayD<T>>) {
        let (batch, cin, len) = in_dim;
        let (_, cout, lout) = dy.dim();
        let k = self.kernel();
        let pad = self.padding as isize;
        let dy = dy
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((batch * lout, cout))
            .unwrap();
        let dw = dy
            .t()
            .dot(cols)
            .into_shape_with_order(self.weight.dim())
            .unwrap();
        let db = dy.sum_axis(Axis(0));
        let dcols = dy.dot(&self.weight_matrix());
        let mut dx = Array3::<T>::zeros(in_dim);
        for b in 0..batch {
            for t in 0..lout {
                let row = dcols.row(b * lout + t);
                for ci in 0..cin {
                    for j in 0..k {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < len {
                            dx[[b, ci, src as usize]] += row[ci * k + j];
                        }
                    }
                }
            }
        }
        (dx, vec![dw.into_dyn(), db.into_dyn()])
    }
}

impl MaxPool1d {
    fn out_len(&self, len: usize) -> Option<usize> {
        len.checked_sub(self.size).map(|v| v / self.stride + 1)
    }

    fn forward<T: Real>(&self, x: Array3<T>) -> (Array3<T>, Cache<T>) {
        let in_dim = x.dim();
        let (batch, ch, len) = in_dim;
        let lout = self.out_len(len).expect("validated by shape propagation");
        let mut out = Array3::<T>::zeros((batch, ch, lout));
        let mut argmax = Vec::with_capacity(batch * ch * lout);
        for b in 0..batch {
            for c in 0..ch {
                for t in 0..lout {
                    let start = t * self.stride;
                    // First maximum wins ties.
                    let mut best = start;
                    for i in start + 1..start + self.size {
                        if x[[b, c, i]] > x[[b, c, best]] {
                            best = i;
                        }
                    }
                    out[[b, c, t]] = x[[b, c, best]];
                    argmax.push(best);
                }
            }
        }
        (out, Cache::Pool { argmax, in_dim })
    }

    fn backward<T: Real>(
        &self,
        argmax: &[usize],
        in_dim: (usize, usize, usize),
        dy: Array3<T>,
    ) -> Array3<T> {
        let (batch, ch, lout) = dy.dim();
        let mut dx = Array3::<T>::zeros(in_dim);
        let mut it = argmax.iter();
        for b in 0..batch {
            for c in 0..ch {
                for t in 0..lout {
                    let src = *it.next().unwrap();
                    dx[[b, c, src]] += dy[[b, c, t]];
                }
            }
        }
        dx
    }
}

impl<T: Real> Lstm<T> {
    /// Xavier-initialises the stacked `[(input + hidden) × 4·hidden]` kernel.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden: usize, rng: &mut R) -> Self {
        let weight = xavier_init(&[input_size + hidden, 4 * hidden], rng)
            .into_dimensionality()
            .unwrap();
        Lstm {
            weight,
            bias: Array1::zeros(4 * hidden),
            input_size,
            hidden,
        }
    }

    fn forward(&self, x: Array3<T>) -> (Array3<T>, Cache<T>) {
        let in_dim = x.dim();
        let (batch, _, steps) = in_dim;
        let hsz = self.hidden;
        let w_x = self.weight.slice(s![..self.input_size, ..]);
        let w_h = self.weight.slice(s![self.input_size.., ..]);
        let mut h = Array2::<T>::zeros((batch, hsz));
        let mut c = Array2::<T>::zeros((batch, hsz));
        let mut cache = Vec::with_capacity(steps);
        for t in 0..steps {
            let xt = x.slice(s![.., .., t]).to_owned();
            let mut z = Array2::<T>::zeros((batch, 4 * hsz));
            z += &self.bias;
            general_mat_mul(T::one(), &xt, &w_x, T::one(), &mut z);
            general_mat_mul(T::one(), &h, &w_h, T::one(), &mut z);
            let mut c_next = Array2::<T>::zeros((batch, hsz));
            let mut h_next = Array2::<T>::zeros((batch, hsz));
            let mut tanh_c = Array2::<T>::zeros((batch, hsz));
            for r in 0..batch {
                let zr = z.row_mut(r).into_slice().unwrap();
                let (zi, rest) = zr.split_at_mut(hsz);
                let (zf, rest) = rest.split_at_mut(hsz);
                let (zg, zo) = rest.split_at_mut(hsz);
                let cp = c.row(r);
                let mut cn = c_next.row_mut(r);
                let mut hn = h_next.row_mut(r);
                let mut tc = tanh_c.row_mut(r);
                for j in 0..hsz {
                    let i = sigmoid(zi[j]);
                    let f = sigmoid(zf[j]);
                    let g = zg[j].tanh();
                    let o = sigmoid(zo[j]);
                    zi[j] = i;
                    zf[j] = f;
                    zg[j] = g;
                    zo[j] = o;
                    let cv = f * cp[j] + i * g;
                    let tv = cv.tanh();
                    cn[j] = cv;
                    tc[j] = tv;
                    hn[j] = o * tv;
                }
            }
            let h_prev = std::mem::replace(&mut h, h_next);
            let c_prev = std::mem::replace(&mut c, c_next);
            cache.push(LstmStep {
                x: xt,
                h_prev,
                c_prev,
                gates: z,
                tanh_c,
            });
        }
        let out = h.into_shape_with_order((batch, hsz, 1)).unwrap();
        (
            out,
            Cache::Lstm(LstmCache {
                in_dim,
                steps: cache,
            }),
        )
    }

    fn backward(&self, cache: &LstmCache<T>, dy: Array3<T>) -> (Array3<T>, Vec<ArrayD<T>>) {
        let (batch, _, steps) = cache.in_dim;
        let hsz = self.hidden;
        let split = self.input_size;
        let w_x = self.weight.slice(s![..split, ..]);
        let w_h = self.weight.slice(s![split.., ..]);
        let mut dw = Array2::<T>::zeros(self.weight.dim());
        let mut db = Array1::<T>::zeros(4 * hsz);
        let mut dx = Array3::<T>::zeros(cache.in_dim);
        let mut dh = into_matrix(dy, batch, hsz);
        let mut dc = Array2::<T>::zeros((batch, hsz));
        let one = T::one();
        for t in (0..steps).rev() {
            let step = &cache.steps[t];
            let mut dz = Array2::<T>::zeros((batch, 4 * hsz));
            for r in 0..batch {
                let gr = step.gates.row(r);
                let gr = gr.as_slice().unwrap();
                let (gi, rest) = gr.split_at(hsz);
                let (gf, rest) = rest.split_at(hsz);
                let (gg, go) = rest.split_at(hsz);
                let dzr = dz.row_mut(r).into_slice().unwrap();
                let (dzi, rest) = dzr.split_at_mut(hsz);
                let (dzf, rest) = rest.split_at_mut(hsz);
                let (dzg, dzo) = rest.split_at_mut(hsz);
                let tc = step.tanh_c.row(r);
                let cp = step.c_prev.row(r);
                let dhr = dh.row(r);
                let mut dcr = dc.row_mut(r);
                for j in 0..hsz {
                    let (i, f, g, o) = (gi[j], gf[j], gg[j], go[j]);
                    let dct = dcr[j] + dhr[j] * o * (one - tc[j] * tc[j]);
                    dzo[j] = dhr[j] * tc[j] * o * (one - o);
                    dzi[j] = dct * g * i * (one - i);
                    dzf[j] = dct * cp[j] * f * (one - f);
                    dzg[j] = dct * i * (one - g * g);
                    dcr[j] = dct * f;
                }
            }
            {
                let mut dw_x = dw.slice_mut(s![..split, ..]);
                general_mat_mul(one, &step.x.t(), &dz, one, &mut dw_x);
            }
            {
                let mut dw_h = dw.slice_mut(s![split.., ..]);
                general_mat_mul(one, &step.h_prev.t(), &dz, one, &mut dw_h);
            }
            db += &dz.sum_axis(Axis(0));
            dx.slice_mut(s![.., .., t]).assign(&dz.dot(&w_x.t()));
            dh = dz.dot(&w_h.t());
        }
        (dx, vec![dw.into_dyn(), db.into_dyn()])
    }
}

impl Dropout {
    fn forward<T: Real, R: Rng + ?Sized>(
        &self,
        mut x: Array3<T>,
        mode: Mode,
        rng: &mut R,
    ) -> (Array3<T>, Cache<T>) {
        if mode == Mode::Infer || self.p == 0.0 {
            return (x, Cache::Dropout { mask: None });
        }
        let keep = T::from(1.0 / (1.0 - self.p)).unwrap();
        let mask = Array3::from_shape_simple_fn(x.dim(), || {
            if rng.random::<f64>() < self.p {
                T::zero()
            } else {
                keep
            }
        });
        x *= &mask;
        (x, Cache::Dropout { mask: Some(mask) })
    }
}

impl<T: Real> Layer<T> {
    /// Output `(channels, length)` for an input `(channels, length)`.
    pub fn output_shape(&self, (ch, len): (usize, usize)) -> Result<(usize, usize)> {
        let bad = |what: String| Err(Error::config(what));
        match self {
            Layer::Dense(d) => {
                if ch * len != d.inputs() {
                    return bad(format!(
                        "dense layer expects {} inputs, got {ch}×{len}",
                        d.inputs()
                    ));
                }
                Ok((d.outputs(), 1))
            }
            Layer::Conv1d(c) => {
                if ch != c.in_channels() {
                    return bad(format!(
                        "conv expects {} channels, got {ch}",
                        c.in_channels()
                    ));
                }
                match c.out_len(len) {
                    Some(l) if l > 0 => Ok((c.out_channels(), l)),
                    _ => bad(format!(
                        "conv kernel {} too long for length {len}",
                        c.kernel()
                    )),
                }
            }
            Layer::MaxPool1d(p) => match p.out_len(len) {
                Some(l) if l > 0 && p.stride > 0 => Ok((ch, l)),
                _ => bad(format!("pool size {} too long for length {len}", p.size)),
            },
            Layer::Lstm(l) => {
                if ch != l.input_size {
                    return bad(format!(
                        "LSTM expects {} input channels, got {ch}",
                        l.input_size
                    ));
                }
                Ok((l.hidden, 1))
            }
            Layer::Relu | Layer::Sigmoid | Layer::Dropout(_) => Ok((ch, len)),
        }
    }

    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        x: Array3<T>,
        mode: Mode,
        rng: &mut R,
    ) -> (Array3<T>, Cache<T>) {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv1d(c) => c.forward(x),
            Layer::MaxPool1d(p) => p.forward(x),
            Layer::Lstm(l) => l.forward(x),
            Layer::Relu => {
                let out = x.mapv_into(|v| v.max(T::zero()));
                (out.clone(), Cache::Relu { output: out })
            }
            Layer::Sigmoid => {
                let out = x.mapv_into(sigmoid);
                (out.clone(), Cache::Sigmoid { output: out })
            }
            Layer::Dropout(d) => d.forward(x, mode, rng),
        }
    }

    /// Returns the input gradient and the parameter gradients in
    /// [`Layer::params_mut`] order.
    pub(crate) fn backward(&self, cache: Cache<T>, dy: Array3<T>) -> (Array3<T>, Vec<ArrayD<T>>) {
        match (self, cache) {
            (Layer::Dense(d), Cache::Dense { input, in_dim }) => d.backward(&input, in_dim, dy),
            (Layer::Conv1d(c), Cache::Conv { cols, in_dim }) => c.backward(&cols, in_dim, dy),
            (Layer::MaxPool1d(p), Cache::Pool { argmax, in_dim }) => {
                (p.backward(&argmax, in_dim, dy), vec![])
            }
            (Layer::Lstm(l), Cache::Lstm(cache)) => l.backward(&cache, dy),
            (Layer::Relu, Cache::Relu { output }) => {
                let mut dy = dy;
                Zip::from(&mut dy).and(&output).for_each(|g, &o| {
                    if o <= T::zero() {
                        *g = T::zero();
                    }
                });
                (dy, vec![])
            }
            (Layer::Sigmoid, Cache::Sigmoid { output }) => {
                let mut dy = dy;
                Zip::from(&mut dy)
                    .and(&output)
                    .for_each(|g, &s| *g = *g * s * (T::one() - s));
                (dy, vec![])
            }
            (Layer::Dropout(_), Cache::Dropout { mask }) => match mask {
                Some(m) => (dy * &m, vec![]),
                None => (dy, vec![]),
            },
            _ => unreachable!("cache does not belong to this layer"),
        }
    }

    pub fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, T>> {
        match self {
            Layer::Dense(d) => vec![d.weight.view_mut().into_dyn(), d.bias.view_mut().into_dyn()],
            Layer::Conv1d(c) => vec![c.weight.view_mut().into_dyn(), c.bias.view_mut().into_dyn()],
            Layer::Lstm(l) => vec![l.weight.view_mut().into_dyn(), l.bias.view_mut().into_dyn()],
            _ => vec![],
        }
    }

    pub fn params(&self) -> Vec<ndarray::ArrayViewD<'_, T>> {
        match self {
            Layer::Dense(d) => vec![d.weight.view().into_dyn(), d.bias.view().into_dyn()],
            Layer::Conv1d(c) => vec![c.weight.view().into_dyn(), c.bias.view().into_dyn()],
            Layer::Lstm(l) => vec![l.weight.view().into_dyn(), l.bias.view().into_dyn()],
            _ => vec![],
        }
    }

    /// Multiplicative weights (kernels and matrices), excluding biases.
    pub fn weight_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.weight.len(),
            Layer::Conv1d(c) => c.weight.len(),
            Layer::Lstm(l) => l.weight.len(),
            _ => 0,
        }
    }

    pub fn bias_count(&self) -> usize {
        match self {
            Layer::Dense(d) => d.bias.len(),
            Layer::Conv1d(c) => c.bias.len(),
            Layer::Lstm(l) => l.bias.len(),
            _ => 0,
        }
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        fn conv<T: Real, U: Real, D: ndarray::Dimension>(
            a: &ndarray::Array<T, D>,
        ) -> ndarray::Array<U, D> {
            a.mapv(|v| U::from(v).unwrap())
        }
        match self {
            Layer::Dense(d) => Layer::Dense(Dense {
                weight: conv(&d.weight),
                bias: conv(&d.bias),
            }),
            Layer::Conv1d(c) => Layer::Conv1d(Conv1d {
                weight: conv(&c.weight),
                bias: conv(&c.bias),
                padding: c.padding,
            }),
            Layer::Lstm(l) => Layer::Lstm(Lstm {
                weight: conv(&l.weight),
                bias: conv(&l.bias),
                input_size: l.input_size,
                hidden: l.hidden,
            }),
            Layer::MaxPool1d(p) => Layer::MaxPool1d(*p),
            Layer::Relu => Layer::Relu,
            Layer::Sigmoid => Layer::Sigmoid,
            Layer::Dropout(d) => Layer::Dropout(*d),
        }
    }
}

/// Reshapes `[batch × a × b]` to `[batch × features]`, copying only when the
/// input is not in standard layout.
fn into_matrix<T: Real>(x: Array3<T>, batch: usize, features: usize) -> Array2<T> {
    let x = if x.is_standard_layout() {
        x
    } else {
        x.as_standard_layout().into_owned()
    };
    x.into_shape_with_order((batch, features)).unwrap()
}
