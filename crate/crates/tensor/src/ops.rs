//! Forward primitives and their backward rules.
//!
//! Axis convention for 2-d tensors: axis 0 runs over rows, axis 1 over
//! columns. `softmax(x, 1)` normalizes each row; `concat(_, 0)` stacks
//! rows.

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::{self, Tensor};

fn shape_err<S: Scalar>(op: &'static str, a: &Tensor<S>, b: &Tensor<S>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        lhs: a.shape_string(),
        rhs: b.shape_string(),
    }
}

impl<S: Scalar> Tape<S> {
    /// `a (r x k) * b (k x c)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.get(a).clone(), self.get(b).clone());
        if av.cols() != bv.rows() {
            return Err(shape_err("matmul", &av, &bv));
        }
        let out = tensor::matmul(&av, &bv);
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![
                    (a.0, tensor::matmul_nt(g, &bv)),
                    (b.0, tensor::matmul_tn(&av, g)),
                ]
            })),
        ))
    }

    /// `a (r x k) * b^T` with `b (c x k)`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.get(a).clone(), self.get(b).clone());
        if av.cols() != bv.cols() {
            return Err(shape_err("matmul_nt", &av, &bv));
        }
        let out = tensor::matmul_nt(&av, &bv);
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![
                    (a.0, tensor::matmul(g, &bv)),
                    (b.0, tensor::matmul_tn(g, &av)),
                ]
            })),
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.get(a), self.get(b));
        if !av.same_shape(bv) {
            return Err(shape_err("add", av, bv));
        }
        let out = av.zip_map(bv, |x, y| x + y);
        Ok(self.push(
            out,
            Some(Box::new(move |g| vec![(a.0, g.clone()), (b.0, g.clone())])),
        ))
    }

    /// Adds a `1 x c` bias row to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (xv, bv) = (self.get(x).clone(), self.get(bias).clone());
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err("add_bias", &xv, &bv));
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                out.set(r, c, out.at(r, c) + bv.at(0, c));
            }
        }
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut db = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        db.set(0, c, db.at(0, c) + g.at(r, c));
                    }
                }
                vec![(x.0, g.clone()), (bias.0, db)]
            })),
        ))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.get(a).clone(), self.get(b).clone());
        if !av.same_shape(&bv) {
            return Err(shape_err("mul", &av, &bv));
        }
        let out = av.zip_map(&bv, |x, y| x * y);
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![
                    (a.0, g.zip_map(&bv, |gi, bi| gi * bi)),
                    (b.0, g.zip_map(&av, |gi, ai| gi * ai)),
                ]
            })),
        ))
    }

    /// Multiplies by a compile-time constant.
    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, TensorError> {
        let f = S::lit(factor);
        let out = self.get(x).map(|v| v * f);
        Ok(self.push(
            out,
            Some(Box::new(move |g| vec![(x.0, g.map(|gi| gi * f))])),
        ))
    }

    /// Broadcast-multiplies `x` by a `1 x 1` tape value.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, TensorError> {
        let (xv, sv) = (self.get(x).clone(), self.get(s).clone());
        let factor = sv.item()?;
        let out = xv.map(|v| v * factor);
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let ds = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&gi, &xi)| gi * xi)
                    .sum();
                vec![(x.0, g.map(|gi| gi * factor)), (s.0, Tensor::scalar(ds))]
            })),
        ))
    }

    /// `constant - x`, element-wise.
    pub fn sub_from(&mut self, constant: f64, x: Var) -> Result<Var, TensorError> {
        let k = S::lit(constant);
        let out = self.get(x).map(|v| k - v);
        Ok(self.push(
            out,
            Some(Box::new(move |g| vec![(x.0, g.map(|gi| -gi))])),
        ))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.get(x).clone();
        let out = xv.map(|v| if v > S::zero() { v } else { S::zero() });
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![(
                    x.0,
                    g.zip_map(&xv, |gi, xi| if xi > S::zero() { gi } else { S::zero() }),
                )]
            })),
        ))
    }

    /// Numerically stable softmax along `axis` (1 = within each row).
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        if axis > 1 {
            return Err(TensorError::InvalidAxis { op: "softmax", axis });
        }
        let xv = self.get(x).clone();
        if xv.is_empty() {
            return Err(TensorError::Empty { op: "softmax" });
        }
        let along_rows = axis == 1;
        let out = softmax_tensor(&xv, along_rows);
        let yv = out.clone();
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                // dx = y * (g - sum(g * y)) along the normalized axis
                let (rows, cols) = (yv.rows(), yv.cols());
                let mut dx = Tensor::zeros(rows, cols);
                if along_rows {
                    for r in 0..rows {
                        let mut dot = S::zero();
                        for c in 0..cols {
                            dot = dot + g.at(r, c) * yv.at(r, c);
                        }
                        for c in 0..cols {
                            dx.set(r, c, yv.at(r, c) * (g.at(r, c) - dot));
                        }
                    }
                } else {
                    for c in 0..cols {
                        let mut dot = S::zero();
                        for r in 0..rows {
                            dot = dot + g.at(r, c) * yv.at(r, c);
                        }
                        for r in 0..rows {
                            dx.set(r, c, yv.at(r, c) * (g.at(r, c) - dot));
                        }
                    }
                }
                vec![(x.0, dx)]
            })),
        ))
    }

    /// Per-row layer normalization with learned gain and bias (`1 x c`).
    pub fn layer_norm(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<Var, TensorError> {
        let xv = self.get(x).clone();
        let gv = self.get(gain).clone();
        let bv = self.get(bias).clone();
        for p in [&gv, &bv] {
            if p.rows() != 1 || p.cols() != xv.cols() {
                return Err(shape_err("layer_norm", &xv, p));
            }
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        let n = S::lit(cols as f64);
        let epsv = S::lit(eps);

        let mut normalized = Tensor::zeros(rows, cols);
        let mut inv_std = vec![S::zero(); rows];
        for r in 0..rows {
            let row = xv.row_slice(r);
            let mean = row.iter().copied().sum::<S>() / n;
            let var = row
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<S>()
                / n;
            let istd = S::one() / (var + epsv).sqrt();
            inv_std[r] = istd;
            for c in 0..cols {
                normalized.set(r, c, (xv.at(r, c) - mean) * istd);
            }
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out.set(r, c, normalized.at(r, c) * gv.at(0, c) + bv.at(0, c));
            }
        }
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut dgain = Tensor::zeros(1, cols);
                let mut dbias = Tensor::zeros(1, cols);
                let mut dx = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let mut mean_dxhat = S::zero();
                    let mut mean_dxhat_xhat = S::zero();
                    for c in 0..cols {
                        let go = g.at(r, c);
                        let xhat = normalized.at(r, c);
                        dgain.set(0, c, dgain.at(0, c) + go * xhat);
                        dbias.set(0, c, dbias.at(0, c) + go);
                        let dxhat = go * gv.at(0, c);
                        mean_dxhat = mean_dxhat + dxhat;
                        mean_dxhat_xhat = mean_dxhat_xhat + dxhat * xhat;
                    }
                    mean_dxhat = mean_dxhat / n;
                    mean_dxhat_xhat = mean_dxhat_xhat / n;
                    for c in 0..cols {
                        let xhat = normalized.at(r, c);
                        let dxhat = g.at(r, c) * gv.at(0, c);
                        dx.set(
                            r,
                            c,
                            inv_std[r] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat),
                        );
                    }
                }
                vec![(x.0, dx), (gain.0, dgain), (bias.0, dbias)]
            })),
        ))
    }

    /// Inverted dropout. With `train = false` (or rate 0) this is the
    /// identity. Training mode draws the keep mask from the tape's RNG.
    pub fn dropout(&mut self, x: Var, rate: f64, train: bool) -> Result<Var, TensorError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Invalid(format!("dropout rate {rate}")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let xv = self.get(x).clone();
        let keep = 1.0 - rate;
        let scale = S::lit(1.0 / keep);
        let rng = self.rng_mut()?;
        let mask: Vec<S> = (0..xv.len())
            .map(|_| if rng.chance(keep) { scale } else { S::zero() })
            .collect();
        let mask = Tensor::from_vec(xv.rows(), xv.cols(), mask);
        let out = xv.zip_map(&mask, |v, m| v * m);
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![(x.0, g.zip_map(&mask, |gi, m| gi * m))]
            })),
        ))
    }

    /// Gathers rows of an embedding table: `table (v x d)`, output
    /// `(indices.len() x d)`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let tv = self.get(table).clone();
        let (vocab, dim) = (tv.rows(), tv.cols());
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(TensorError::Invalid(format!(
                "embedding index {bad} out of range for table with {vocab} rows"
            )));
        }
        let mut out = Tensor::zeros(indices.len(), dim);
        for (r, &i) in indices.iter().enumerate() {
            for c in 0..dim {
                out.set(r, c, tv.at(i, c));
            }
        }
        let idx: Vec<usize> = indices.to_vec();
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut dt = Tensor::zeros(vocab, dim);
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..dim {
                        dt.set(i, c, dt.at(i, c) + g.at(r, c));
                    }
                }
                vec![(table.0, dt)]
            })),
        ))
    }

    /// Concatenates along `axis` (0 = stack rows, 1 = widen columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        if axis > 1 {
            return Err(TensorError::InvalidAxis { op: "concat", axis });
        }
        if parts.is_empty() {
            return Err(TensorError::Empty { op: "concat" });
        }
        let tensors: Vec<Tensor<S>> = parts.iter().map(|&p| self.get(p).clone()).collect();
        let first = &tensors[0];
        for t in &tensors[1..] {
            let consistent = if axis == 0 {
                t.cols() == first.cols()
            } else {
                t.rows() == first.rows()
            };
            if !consistent {
                return Err(shape_err("concat", first, t));
            }
        }
        let out = if axis == 0 {
            let rows = tensors.iter().map(Tensor::rows).sum();
            let mut data = Vec::with_capacity(rows * first.cols());
            for t in &tensors {
                data.extend_from_slice(t.data());
            }
            Tensor::from_vec(rows, first.cols(), data)
        } else {
            let cols: usize = tensors.iter().map(Tensor::cols).sum();
            let mut out = Tensor::zeros(first.rows(), cols);
            let mut offset = 0;
            for t in &tensors {
                for r in 0..t.rows() {
                    for c in 0..t.cols() {
                        out.set(r, offset + c, t.at(r, c));
                    }
                }
                offset += t.cols();
            }
            out
        };
        let sizes: Vec<(usize, usize, usize)> = parts
            .iter()
            .zip(&tensors)
            .map(|(p, t)| (p.0, t.rows(), t.cols()))
            .collect();
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut grads = Vec::with_capacity(sizes.len());
                let mut offset = 0;
                for &(node, rows, cols) in &sizes {
                    let mut dp = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            let v = if axis == 0 {
                                g.at(offset + r, c)
                            } else {
                                g.at(r, offset + c)
                            };
                            dp.set(r, c, v);
                        }
                    }
                    offset += if axis == 0 { rows } else { cols };
                    grads.push((node, dp));
                }
                grads
            })),
        ))
    }

    /// Contiguous slice `start..end` along `axis`.
    pub fn slice(
        &mut self,
        x: Var,
        axis: usize,
        start: usize,
        end: usize,
    ) -> Result<Var, TensorError> {
        if axis > 1 {
            return Err(TensorError::InvalidAxis { op: "slice", axis });
        }
        let xv = self.get(x).clone();
        let limit = if axis == 0 { xv.rows() } else { xv.cols() };
        if start > end || end > limit {
            return Err(TensorError::Invalid(format!(
                "slice {start}..{end} out of range for {} along axis {axis}",
                xv.shape_string()
            )));
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        let out = if axis == 0 {
            let mut o = Tensor::zeros(end - start, cols);
            for r in start..end {
                for c in 0..cols {
                    o.set(r - start, c, xv.at(r, c));
                }
            }
            o
        } else {
            let mut o = Tensor::zeros(rows, end - start);
            for r in 0..rows {
                for c in start..end {
                    o.set(r, c - start, xv.at(r, c));
                }
            }
            o
        };
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut dx = Tensor::zeros(rows, cols);
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        if axis == 0 {
                            dx.set(start + r, c, g.at(r, c));
                        } else {
                            dx.set(r, start + c, g.at(r, c));
                        }
                    }
                }
                vec![(x.0, dx)]
            })),
        ))
    }

    /// Column-wise maximum over rows: `(r x c) -> (1 x c)`. Gradient flows
    /// to the first maximal row of each column.
    pub fn max_over_rows(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.get(x).clone();
        if xv.rows() == 0 {
            return Err(TensorError::Empty { op: "max_over_rows" });
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        let mut out = Tensor::zeros(1, cols);
        let mut winners = vec![0usize; cols];
        for c in 0..cols {
            let mut best = 0;
            for r in 1..rows {
                if xv.at(r, c) > xv.at(best, c) {
                    best = r;
                }
            }
            winners[c] = best;
            out.set(0, c, xv.at(best, c));
        }
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let mut dx = Tensor::zeros(rows, cols);
                for c in 0..cols {
                    dx.set(winners[c], c, g.at(0, c));
                }
                vec![(x.0, dx)]
            })),
        ))
    }

    /// Sum of all elements, as a `1 x 1` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.get(x).clone();
        let out = Tensor::scalar(xv.sum());
        let (rows, cols) = (xv.rows(), xv.cols());
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                let gi = g.at(0, 0);
                vec![(x.0, Tensor::filled(rows, cols, gi))]
            })),
        ))
    }

    /// Mean of all elements.
    pub fn mean(&mut self, x: Var) -> Result<Var, TensorError> {
        let xv = self.get(x);
        if xv.is_empty() {
            return Err(TensorError::Empty { op: "mean" });
        }
        let n = xv.len() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    /// `ln(max(x, floor))`, the probability-floored logarithm used by the
    /// losses. Gradient is `1/x` above the floor and 0 below it.
    pub fn ln_floor(&mut self, x: Var, floor: f64) -> Result<Var, TensorError> {
        if floor <= 0.0 {
            return Err(TensorError::Invalid(format!("ln floor {floor}")));
        }
        let f = S::lit(floor);
        let xv = self.get(x).clone();
        let out = xv.map(|v| if v > f { v.ln() } else { f.ln() });
        Ok(self.push(
            out,
            Some(Box::new(move |g| {
                vec![(
                    x.0,
                    g.zip_map(&xv, |gi, xi| if xi > f { gi / xi } else { S::zero() }),
                )]
            })),
        ))
    }

    /// Sum of the elements at the given flat indices, as a scalar.
    pub fn gather_sum(&mut self, x: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let xv = self.get(x).clone();
        if let Some(&bad) = indices.iter().find(|&&i| i >= xv.len()) {
            return Err(TensorError::Invalid(format!(
                "gather index {bad} out of range for {} elements",
                xv.len()
            )));
        }
        let total = indices.iter().map(|&i| xv.data()[i]).sum();
        let idx: Vec<usize> = indices.to_vec();
        let (rows, cols) = (xv.rows(), xv.cols());
        Ok(self.push(
            Tensor::scalar(total),
            Some(Box::new(move |g| {
                let gi = g.at(0, 0);
                let mut dx = Tensor::zeros(rows, cols);
                for &i in &idx {
                    dx.data_mut()[i] = dx.data_mut()[i] + gi;
                }
                vec![(x.0, dx)]
            })),
        ))
    }

    /// Adds a constant tensor (e.g. an attention mask or positional
    /// encoding); no gradient flows into the constant.
    pub fn add_const(&mut self, x: Var, constant: &Tensor<S>) -> Result<Var, TensorError> {
        let xv = self.get(x);
        if !xv.same_shape(constant) {
            return Err(shape_err("add_const", xv, constant));
        }
        let out = xv.zip_map(constant, |a, b| a + b);
        Ok(self.push(out, Some(Box::new(move |g| vec![(x.0, g.clone())]))))
    }
}

fn softmax_tensor<S: Scalar>(x: &Tensor<S>, along_rows: bool) -> Tensor<S> {
    let (rows, cols) = (x.rows(), x.cols());
    let mut out = Tensor::zeros(rows, cols);
    let lanes = if along_rows { rows } else { cols };
    let width = if along_rows { cols } else { rows };
    for lane in 0..lanes {
        let at = |i: usize| {
            if along_rows {
                x.at(lane, i)
            } else {
                x.at(i, lane)
            }
        };
        let mut max = at(0);
        for i in 1..width {
            if at(i) > max {
                max = at(i);
            }
        }
        let mut total = S::zero();
        let mut exps = vec![S::zero(); width];
        for (i, e) in exps.iter_mut().enumerate() {
            *e = (at(i) - max).exp();
            total = total + *e;
        }
        for (i, e) in exps.into_iter().enumerate() {
            let v = e / total;
            if along_rows {
                out.set(lane, i, v);
            } else {
                out.set(i, lane, v);
            }
        }
    }
    out
}
