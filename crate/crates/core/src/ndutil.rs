//! Small helpers for dense arrays stored with the first axis fastest.

/// Start offsets and the element stride of every 1D line along `axis`.
pub(crate) fn lines(shape: &[usize], axis: usize) -> (Vec<usize>, usize) {
    let stride: usize = shape[..axis].iter().product();
    let len = shape[axis];
    let outer: usize = shape[axis + 1..].iter().product();
    let mut starts = Vec::with_capacity(stride * outer);
    for o in 0..outer {
        for i in 0..stride {
            starts.push(o * stride * len + i);
        }
    }
    (starts, stride)
}

/// Multi-index of a flat offset.
pub(crate) fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    shape
        .iter()
        .map(|&n| {
            let i = flat % n;
            flat /= n;
            i
        })
        .collect()
}

/// Flat offset of a multi-index.
pub(crate) fn ravel(index: &[usize], shape: &[usize]) -> usize {
    index.iter().zip(shape).rev().fold(0, |acc, (&i, &n)| acc * n + i)
}
