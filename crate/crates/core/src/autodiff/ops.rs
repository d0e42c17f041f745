use super::{accumulate, Node, Op, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `tanh(x) * sigmoid(x + offset)`.
pub fn gate_value(x: f64, offset: f64) -> f64 {
    x.tanh() * sigmoid(x + offset)
}

/// Length-preserving dilated convolution with a centred kernel.
///
/// `x` is `C_in x L`, `kernel` is `C_out x C_in x W`; output tap `w` reads
/// `x[i, t + (w - W/2) * dilation]`, zero outside `[0, L)`.
#[allow(clippy::too_many_arguments)]
pub fn dilated_conv1d_forward(
    x: &[f64],
    c_in: usize,
    len: usize,
    kernel: &[f64],
    c_out: usize,
    width: usize,
    bias: Option<&[f64]>,
    dilation: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; c_out * len];
    let centre = (width / 2) as isize;
    for c in 0..c_out {
        let row = &mut out[c * len..(c + 1) * len];
        if let Some(b) = bias {
            row.iter_mut().for_each(|v| *v = b[c]);
        }
        for i in 0..c_in {
            let xi = &x[i * len..(i + 1) * len];
            for w in 0..width {
                let k = kernel[(c * c_in + i) * width + w];
                if k == 0.0 {
                    continue;
                }
                let off = (w as isize - centre) * dilation as isize;
                let (t0, t1) = tap_range(off, len);
                for t in t0..t1 {
                    row[t] += k * xi[(t as isize + off) as usize];
                }
            }
        }
    }
    out
}

/// Output positions `t` for which `t + off` lies in `[0, len)`.
fn tap_range(off: isize, len: usize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

fn dim_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Dimension(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl Tape {
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (k2, n) = self.value(b).dims2()?;
        if k != k2 {
            return Err(dim_err("matmul", self.shape(a), self.shape(b)));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = av[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose()?;
        Ok(self.push(t, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err("add", self.shape(a), self.shape(b)));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    /// `a [m x n] + bias [n]`, broadcasting the bias over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2()?;
        if self.value(bias).len() != n {
            return Err(dim_err("add_row", self.shape(a), self.shape(bias)));
        }
        let b = self.value(bias).data();
        let mut data = self.value(a).data().to_vec();
        for i in 0..m {
            for (v, bj) in data[i * n..(i + 1) * n].iter_mut().zip(b) {
                *v += bj;
            }
        }
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::AddRow(a, bias)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err("mul", self.shape(a), self.shape(b)));
        }
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a);
        let t = Tensor::new(v.shape(), v.data().iter().map(|x| x * factor).collect()).expect("same shape");
        self.push(t, Op::Scale(a, factor))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2()?;
        let mut data = self.value(a).data().to_vec();
        for i in 0..m {
            softmax_in_place(&mut data[i * n..(i + 1) * n]);
        }
        let t = Tensor::new(self.shape(a), data)?;
        Ok(self.push(t, Op::SoftmaxRows(a)))
    }

    /// Per-row normalization followed by an affine `gain`/`bias` over columns.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if n == 0 {
            return Err(Error::Dimension("layer_norm over zero columns".into()));
        }
        if self.value(gain).len() != n || self.value(bias).len() != n {
            return Err(dim_err("layer_norm", self.shape(x), self.shape(gain)));
        }
        let xv = self.value(x).data();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std[i] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let t = Tensor::new(self.shape(x), out)?;
        Ok(self.push(t, Op::LayerNorm { x, gain, bias, xhat, inv_std }))
    }

    /// See [`dilated_conv1d_forward`]. `bias`, when given, has `C_out`
    /// entries.
    pub fn dilated_conv1d(&mut self, x: Var, kernel: Var, bias: Option<Var>, dilation: usize) -> Result<Var> {
        if dilation < 1 {
            return Err(Error::Parameter("dilation must be at least 1".into()));
        }
        let (c_in, len) = self.value(x).dims2()?;
        if len < 1 {
            return Err(Error::Dimension("convolution over an empty sequence".into()));
        }
        let (c_out, kc_in, width) = match self.shape(kernel) {
            [a, b, c] => (*a, *b, *c),
            s => return Err(Error::Dimension(format!("conv kernel must be 3-d, got {s:?}"))),
        };
        if kc_in != c_in || width == 0 {
            return Err(dim_err("dilated_conv1d", self.shape(x), self.shape(kernel)));
        }
        if let Some(b) = bias {
            if self.value(b).len() != c_out {
                return Err(dim_err("dilated_conv1d bias", self.shape(kernel), self.shape(b)));
            }
        }
        let out = dilated_conv1d_forward(
            self.value(x).data(),
            c_in,
            len,
            self.value(kernel).data(),
            c_out,
            width,
            bias.map(|b| self.value(b).data()),
            dilation,
        );
        let t = Tensor::new(&[c_out, len], out)?;
        Ok(self.push(t, Op::DilatedConv1d { x, kernel, bias, dilation }))
    }

    /// Elementwise `tanh(x) * sigmoid(x + offset)`.
    pub fn gate(&mut self, x: Var, offset: f64) -> Var {
        let v = self.value(x);
        let data = v.data().iter().map(|&z| gate_value(z, offset)).collect();
        let t = Tensor::new(v.shape(), data).expect("same shape");
        self.push(t, Op::Gate { x, offset })
    }

    /// `tanh(x) * sigmoid(x)`.
    pub fn gated_activation(&mut self, x: Var) -> Var {
        self.gate(x, 0.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor::new(v.shape(), v.data().iter().map(|z| z.max(0.0)).collect()).expect("same shape");
        self.push(t, Op::Relu(x))
    }

    /// Stack matrices sharing a column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Dimension("concat_rows of nothing".into()))?;
        let (_, cols) = self.value(first).dims2()?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if c != cols {
                return Err(dim_err("concat_rows", self.shape(first), self.shape(p)));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let t = Tensor::new(&[rows, cols], data)?;
        Ok(self.push(t, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, count: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if start + count > rows {
            return Err(Error::Dimension(format!("row slice {start}..{} of {rows} rows", start + count)));
        }
        let data = self.value(x).data()[start * cols..(start + count) * cols].to_vec();
        let t = Tensor::new(&[count, cols], data)?;
        Ok(self.push(t, Op::SliceRows { x, start }))
    }

    /// Contiguous row blocks of the given sizes.
    pub fn split_rows(&mut self, x: Var, sizes: &[usize]) -> Result<Vec<Var>> {
        let (rows, _) = self.value(x).dims2()?;
        let total: usize = sizes.iter().sum();
        if total != rows {
            return Err(Error::Dimension(format!("split sizes {sizes:?} sum to {total}, tensor has {rows} rows")));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &s in sizes {
            out.push(self.slice_rows(x, start, s)?);
            start += s;
        }
        Ok(out)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Dimension("concat_cols of nothing".into()))?;
        let (rows, _) = self.value(first).dims2()?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != rows {
                return Err(dim_err("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(c);
        }
        let cols: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let t = Tensor::new(&[rows, cols], data)?;
        Ok(self.push(t, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, count: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if start + count > cols {
            return Err(Error::Dimension(format!("column slice {start}..{} of {cols} columns", start + count)));
        }
        let v = self.value(x).data();
        let mut data = Vec::with_capacity(rows * count);
        for i in 0..rows {
            data.extend_from_slice(&v[i * cols + start..i * cols + start + count]);
        }
        let t = Tensor::new(&[rows, count], data)?;
        Ok(self.push(t, Op::SliceCols { x, start }))
    }

    /// Column means: `m x n -> 1 x n`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if m == 0 {
            return Err(Error::Dimension("mean over zero rows".into()));
        }
        let v = self.value(x).data();
        let mut out = vec![0.0; n];
        for i in 0..m {
            for (o, x) in out.iter_mut().zip(&v[i * n..(i + 1) * n]) {
                *o += x;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        let t = Tensor::new(&[1, n], out)?;
        Ok(self.push(t, Op::MeanRows(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Weighted cross-entropy `-weight * log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize, weight: f64) -> Result<Var> {
        let z = self.value(logits).data();
        if target >= z.len() {
            return Err(Error::Dimension(format!("target class {target} outside {} logits", z.len())));
        }
        let mut probs = z.to_vec();
        softmax_in_place(&mut probs);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = weight * (lse - z[target]);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, target, weight, probs }))
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// Push `upstream` (the gradient of node `idx`) into its inputs.
pub(super) fn backward_rule(nodes: &[Node], idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[idx];
    let wants = |v: Var| nodes[v.0].requires_grad;
    let val = |v: Var| &nodes[v.0].value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = val(*a).dims2().unwrap();
            let (_, n) = val(*b).dims2().unwrap();
            let av = val(*a).data();
            let bv = val(*b).data();
            if wants(*a) {
                accumulate(grads, *a, m * k, |da| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
            }
            if wants(*b) {
                accumulate(grads, *b, k * n, |db| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for (d, gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d += aip * gv;
                            }
                        }
                    }
                });
            }
        }
        Op::Transpose(a) => {
            if wants(*a) {
                let (m, n) = val(*a).dims2().unwrap();
                accumulate(grads, *a, m * n, |da| {
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] += g[j * m + i];
                        }
                    }
                });
            }
        }
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if wants(v) {
                    accumulate(grads, v, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                }
            }
        }
        Op::AddRow(a, bias) => {
            if wants(*a) {
                accumulate(grads, *a, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
            }
            if wants(*bias) {
                let n = val(*bias).len();
                accumulate(grads, *bias, n, |d| {
                    for row in g.chunks(n) {
                        d.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                    }
                });
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            if wants(*a) {
                accumulate(grads, *a, g.len(), |d| {
                    for i in 0..g.len() {
                        d[i] += g[i] * bv[i];
                    }
                });
            }
            if wants(*b) {
                accumulate(grads, *b, g.len(), |d| {
                    for i in 0..g.len() {
                        d[i] += g[i] * av[i];
                    }
                });
            }
        }
        Op::Scale(a, f) => {
            if wants(*a) {
                accumulate(grads, *a, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g * f));
            }
        }
        Op::SoftmaxRows(a) => {
            if wants(*a) {
                let (m, n) = node.value.dims2().unwrap();
                let y = node.value.data();
                accumulate(grads, *a, m * n, |d| {
                    for i in 0..m {
                        let yr = &y[i * n..(i + 1) * n];
                        let gr = &g[i * n..(i + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for j in 0..n {
                            d[i * n + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
        }
        Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
            let (m, n) = val(*x).dims2().unwrap();
            let gv = val(*gain).data();
            if wants(*x) {
                accumulate(grads, *x, m * n, |d| {
                    let mut dxhat = vec![0.0; n];
                    for i in 0..m {
                        let h = &xhat[i * n..(i + 1) * n];
                        for j in 0..n {
                            dxhat[j] = g[i * n + j] * gv[j];
                        }
                        let s1: f64 = dxhat.iter().sum();
                        let s2: f64 = dxhat.iter().zip(h).map(|(a, b)| a * b).sum();
                        let scale = inv_std[i] / n as f64;
                        for j in 0..n {
                            d[i * n + j] += scale * (n as f64 * dxhat[j] - s1 - h[j] * s2);
                        }
                    }
                });
            }
            if wants(*gain) {
                accumulate(grads, *gain, n, |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
            }
            if wants(*bias) {
                accumulate(grads, *bias, n, |d| {
                    for row in g.chunks(n) {
                        d.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                    }
                });
            }
        }
        Op::DilatedConv1d { x, kernel, bias, dilation } => {
            let (c_in, len) = val(*x).dims2().unwrap();
            let (c_out, width) = match val(*kernel).shape() {
                [a, _, c] => (*a, *c),
                _ => unreachable!(),
            };
            let xv = val(*x).data();
            let kv = val(*kernel).data();
            let centre = (width / 2) as isize;
            if wants(*x) {
                accumulate(grads, *x, c_in * len, |dx| {
                    for c in 0..c_out {
                        let gr = &g[c * len..(c + 1) * len];
                        for i in 0..c_in {
                            for w in 0..width {
                                let k = kv[(c * c_in + i) * width + w];
                                let off = (w as isize - centre) * *dilation as isize;
                                let (t0, t1) = tap_range(off, len);
                                for t in t0..t1 {
                                    dx[i * len + (t as isize + off) as usize] += k * gr[t];
                                }
                            }
                        }
                    }
                });
            }
            if wants(*kernel) {
                accumulate(grads, *kernel, c_out * c_in * width, |dk| {
                    for c in 0..c_out {
                        let gr = &g[c * len..(c + 1) * len];
                        for i in 0..c_in {
                            let xi = &xv[i * len..(i + 1) * len];
                            for w in 0..width {
                                let off = (w as isize - centre) * *dilation as isize;
                                let (t0, t1) = tap_range(off, len);
                                let mut acc = 0.0;
                                for t in t0..t1 {
                                    acc += xi[(t as isize + off) as usize] * gr[t];
                                }
                                dk[(c * c_in + i) * width + w] += acc;
                            }
                        }
                    }
                });
            }
            if let Some(b) = bias {
                if wants(*b) {
                    accumulate(grads, *b, c_out, |db| {
                        for c in 0..c_out {
                            db[c] += g[c * len..(c + 1) * len].iter().sum::<f64>();
                        }
                    });
                }
            }
        }
        Op::Gate { x, offset } => {
            if wants(*x) {
                let xv = val(*x).data();
                accumulate(grads, *x, g.len(), |d| {
                    for i in 0..g.len() {
                        let th = xv[i].tanh();
                        let s = sigmoid(xv[i] + offset);
                        d[i] += g[i] * ((1.0 - th * th) * s + th * s * (1.0 - s));
                    }
                });
            }
        }
        Op::Relu(x) => {
            if wants(*x) {
                let xv = val(*x).data();
                accumulate(grads, *x, g.len(), |d| {
                    for i in 0..g.len() {
                        if xv[i] > 0.0 {
                            d[i] += g[i];
                        }
                    }
                });
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let n = val(p).len();
                if wants(p) {
                    accumulate(grads, p, n, |d| {
                        d.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, g)| *d += g);
                    });
                }
                offset += n;
            }
        }
        Op::SliceRows { x, start } => {
            if wants(*x) {
                let (_, cols) = val(*x).dims2().unwrap();
                let n = val(*x).len();
                accumulate(grads, *x, n, |d| {
                    d[start * cols..start * cols + g.len()].iter_mut().zip(g).for_each(|(d, g)| *d += g);
                });
            }
        }
        Op::ConcatCols(parts) => {
            let (rows, cols) = node.value.dims2().unwrap();
            let mut col0 = 0;
            for &p in parts {
                let (_, w) = val(p).dims2().unwrap();
                if wants(p) {
                    accumulate(grads, p, rows * w, |d| {
                        for i in 0..rows {
                            for j in 0..w {
                                d[i * w + j] += g[i * cols + col0 + j];
                            }
                        }
                    });
                }
                col0 += w;
            }
        }
        Op::SliceCols { x, start } => {
            if wants(*x) {
                let (rows, cols) = val(*x).dims2().unwrap();
                let (_, w) = node.value.dims2().unwrap();
                accumulate(grads, *x, rows * cols, |d| {
                    for i in 0..rows {
                        for j in 0..w {
                            d[i * cols + start + j] += g[i * w + j];
                        }
                    }
                });
            }
        }
        Op::MeanRows(x) => {
            if wants(*x) {
                let (m, n) = val(*x).dims2().unwrap();
                accumulate(grads, *x, m * n, |d| {
                    for i in 0..m {
                        for j in 0..n {
                            d[i * n + j] += g[j] / m as f64;
                        }
                    }
                });
            }
        }
        Op::Sum(x) => {
            if wants(*x) {
                let n = val(*x).len();
                accumulate(grads, *x, n, |d| d.iter_mut().for_each(|d| *d += g[0]));
            }
        }
        Op::CrossEntropy { logits, target, weight, probs } => {
            if wants(*logits) {
                accumulate(grads, *logits, probs.len(), |d| {
                    for (j, p) in probs.iter().enumerate() {
                        let onehot = if j == *target { 1.0 } else { 0.0 };
                        d[j] += g[0] * weight * (p - onehot);
                    }
                });
            }
        }
    }
}
