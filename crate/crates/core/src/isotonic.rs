//! Weighted isotonic projection via pool-adjacent-violators.
//!
//! Solves `min Σ w_l (b_l - y_l)²` over nondecreasing `b`, optionally with a
//! pointwise lower bound `b_l >= L_l`. Bounds fold into the block minimizer:
//! a pooled block takes the larger of its weighted mean and the largest
//! bound inside it, which is the exact constrained block optimum, so the
//! usual PAVA merge loop stays valid for the bounded problem.

use crate::{Error, Result};

#[derive(Clone, Copy)]
struct Block {
    wsum: f64,
    wysum: f64,
    bound: f64,
    len: usize,
}

impl Block {
    fn value(&self) -> f64 {
        (self.wysum / self.wsum).max(self.bound)
    }
}

/// Weighted nondecreasing projection of `y`, with an optional pointwise
/// lower bound. Weights must be strictly positive.
///
/// An upper-bound / nonincreasing variant is obtained by negating and
/// reversing the inputs; see [`monotone_minorant`].
pub fn monotone_projection(y: &[f64], weights: &[f64], lower: Option<&[f64]>) -> Result<Vec<f64>> {
    if weights.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: weights.len() });
    }
    if let Some(l) = lower {
        if l.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), got: l.len() });
        }
    }
    if let Some(bad) = weights.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::NonpositiveWeight(bad));
    }

    let mut stack: Vec<Block> = Vec::with_capacity(y.len());
    for l in 0..y.len() {
        let bound = lower.map_or(f64::NEG_INFINITY, |b| b[l]);
        stack.push(Block { wsum: weights[l], wysum: weights[l] * y[l], bound, len: 1 });
        while stack.len() >= 2 {
            let top = stack[stack.len() - 1];
            let prev = stack[stack.len() - 2];
            if prev.value() > top.value() {
                stack.pop();
                let merged = stack.last_mut().unwrap();
                merged.wsum += top.wsum;
                merged.wysum += top.wysum;
                merged.bound = merged.bound.max(top.bound);
                merged.len += top.len;
            } else {
                break;
            }
        }
    }

    let mut out = Vec::with_capacity(y.len());
    for block in &stack {
        let v = block.value();
        out.extend(std::iter::repeat(v).take(block.len));
    }
    Ok(out)
}

/// Largest nondecreasing function below `y` pointwise (running minimum from
/// the right), the sign-flipped upper-bound call of [`monotone_projection`].
pub fn monotone_minorant(y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let flipped: Vec<f64> = y.iter().rev().map(|v| -v).collect();
    let wrev: Vec<f64> = weights.iter().rev().copied().collect();
    let proj = monotone_projection(&flipped, &wrev, Some(&flipped))?;
    Ok(proj.into_iter().rev().map(|v| -v).collect())
}

/// Smallest nondecreasing function above `y` pointwise (running maximum),
/// i.e. the projection of `y` onto `{b nondecreasing, b >= y}`.
pub fn monotone_majorant(y: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    monotone_projection(y, weights, Some(y))
}
