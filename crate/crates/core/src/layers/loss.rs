use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Mean negative log-likelihood over the rows selected by `mask`, and its
/// gradient with respect to `logits`. Unselected rows get zero gradient.
pub fn softmax_cross_entropy(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[bool],
) -> Result<(f64, DenseMatrix)> {
    let n = logits.rows();
    if labels.len() != n || mask.len() != n {
        return Err(Error::shape(
            "softmax_cross_entropy",
            format!("{n} logit rows, {} labels, {} mask entries", labels.len(), mask.len()),
        ));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("loss mask selects no rows".into()));
    }
    let classes = logits.cols();
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(n, classes);
    for r in (0..n).filter(|&r| mask[r]) {
        let label = labels[r];
        if label >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {label} at row {r} outside {classes} classes"
            )));
        }
        let row = logits.row(r);
        let (arg, max) = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, &v)| (v - max).exp())
            .sum();
        let log_norm = max + rest.ln_1p();
        loss += log_norm - row[label];
        let g = grad.row_mut(r);
        for (c, gv) in g.iter_mut().enumerate() {
            *gv = (row[c] - log_norm).exp() * inv;
        }
        g[label] -= inv;
    }
    Ok((loss * inv, grad))
}
