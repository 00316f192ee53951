//! Lane alignment units between memory words and processing lanes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftRightOut<T> {
    /// The `p` values presented to the processing lanes.
    pub lanes: Vec<T>,
    /// Leading-word values left of the lanes, kept for write-back.
    pub left_half: Vec<T>,
    /// Trailing-word values right of the lanes, kept for write-back.
    pub right_half: Vec<T>,
}

/// Extracts `p` contiguous values starting at `shift` from a two-word window.
pub fn shift_right<T: Copy + Default>(window: &[T], shift: usize) -> Result<ShiftRightOut<T>> {
    if !window.len().is_multiple_of(2) || window.is_empty() {
        return Err(Error::Contract(format!(
            "window of {} values is not two words",
            window.len()
        )));
    }
    let p = window.len() / 2;
    if shift >= 2 * p {
        return Err(Error::Contract(format!(
            "shift {shift} out of range for p = {p}"
        )));
    }
    let mut ext = window.to_vec();
    ext.resize(3 * p, T::default());
    Ok(ShiftRightOut {
        lanes: ext[shift..shift + p].to_vec(),
        left_half: ext[..shift].to_vec(),
        right_half: ext[(shift + p).min(2 * p)..2 * p].to_vec(),
    })
}

/// Places `lanes` at offset `left.len()` between `left` and `right` and
/// returns the two resulting words.
pub fn shift_left<T: Copy>(left: &[T], lanes: &[T], right: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let p = lanes.len();
    if p == 0 || left.len() >= p || left.len() + right.len() != p {
        return Err(Error::Contract(format!(
            "halves of {} and {} values do not frame {} lanes",
            left.len(),
            right.len(),
            p
        )));
    }
    let mut all = Vec::with_capacity(2 * p);
    all.extend_from_slice(left);
    all.extend_from_slice(lanes);
    all.extend_from_slice(right);
    let hi = all.split_off(p);
    Ok((all, hi))
}

/// Single-word write-back when one word holds a whole circulant.
pub fn fold<T: Copy>(lanes: &[T], shift: usize) -> Vec<T> {
    let p = lanes.len();
    (0..p).map(|x| lanes[(x + p - shift % p) % p]).collect()
}

pub struct WriteBackInputs<'a, T> {
    pub c: usize,
    pub k: usize,
    pub shift: usize,
    pub buffered_left: &'a [T],
    pub buffered_right: &'a [T],
    pub previous: Option<&'a [T]>,
    pub first: Option<&'a [T]>,
}

/// Write-back halves for sub-block `c` (1-based) of `k`.
///
/// The first sub-block restores both halves from its own buffer. Later
/// sub-blocks take the left half from the previous sub-block's trailing
/// outputs, and the last takes its right half from the first sub-block's
/// leading outputs, so no half freshly written in this layer is replaced by
/// the value read before the update.
pub fn write_back_halves<T: Copy>(w: &WriteBackInputs<'_, T>) -> Result<(Vec<T>, Vec<T>)> {
    if w.k < 2 || w.c == 0 || w.c > w.k {
        return Err(Error::Contract(format!("sub-block {} of {}", w.c, w.k)));
    }
    let p = w.buffered_left.len() + w.buffered_right.len();
    let s = w.shift;
    if s != w.buffered_left.len() {
        return Err(Error::Contract(format!(
            "left half of {} values for shift {s}",
            w.buffered_left.len()
        )));
    }
    let left = if w.c == 1 {
        w.buffered_left.to_vec()
    } else {
        let prev = w
            .previous
            .ok_or_else(|| Error::Contract("missing previous sub-block outputs".into()))?;
        if prev.len() != p {
            return Err(Error::Contract(format!(
                "previous outputs have {} lanes, expected {p}",
                prev.len()
            )));
        }
        prev[p - s..].to_vec()
    };
    let right = if w.c == w.k {
        let first = w
            .first
            .ok_or_else(|| Error::Contract("missing first sub-block outputs".into()))?;
        if first.len() != p {
            return Err(Error::Contract(format!(
                "first outputs have {} lanes, expected {p}",
                first.len()
            )));
        }
        first[..p - s].to_vec()
    } else {
        w.buffered_right.to_vec()
    };
    Ok((left, right))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_extracts_window() {
        let out = shift_right(&[1, 2, 3, 4], 1).unwrap();
        assert_eq!(out.lanes, vec![2, 3]);
        assert_eq!(out.left_half, vec![1]);
        assert_eq!(out.right_half, vec![4]);
        assert_eq!(shift_right(&[1, 2, 3, 4], 0).unwrap().lanes, vec![1, 2]);
        assert_eq!(shift_right(&[1, 2, 3, 4], 3).unwrap().lanes, vec![4, 0]);
        assert!(shift_right(&[1, 2, 3, 4], 4).is_err());
        assert!(shift_right(&[1, 2, 3], 0).is_err());
    }

    #[test]
    fn round_trip_all_shifts() {
        for p in 1..6usize {
            let window: Vec<usize> = (10..10 + 2 * p).collect();
            for s in 0..p {
                let out = shift_right(&window, s).unwrap();
                let (a, b) = shift_left(&out.left_half, &out.lanes, &out.right_half).unwrap();
                assert_eq!([a, b].concat(), window);
            }
        }
    }

    #[test]
    fn left_rejects_bad_halves() {
        assert!(shift_left(&[1, 2], &[3, 4], &[]).is_err());
        assert!(shift_left(&[1], &[3, 4], &[5, 6]).is_err());
        assert!(shift_left::<i32>(&[], &[], &[]).is_err());
    }

    #[test]
    fn fold_rotates() {
        // lanes start at offset 1 of the word: word[1] = lanes[0]
        assert_eq!(fold(&[10, 11, 12], 1), vec![12, 10, 11]);
        assert_eq!(fold(&[10, 11, 12], 0), vec![10, 11, 12]);
    }

    #[test]
    fn write_back_rule() {
        let prev = [1, 2, 3, 4];
        let first = [5, 6, 7, 8];
        let mk = |c| WriteBackInputs {
            c,
            k: 3,
            shift: 1,
            buffered_left: &[0][..],
            buffered_right: &[9, 9, 9][..],
            previous: Some(&prev[..]),
            first: Some(&first[..]),
        };
        assert_eq!(write_back_halves(&mk(1)).unwrap(), (vec![0], vec![9, 9, 9]));
        assert_eq!(write_back_halves(&mk(2)).unwrap(), (vec![4], vec![9, 9, 9]));
        assert_eq!(write_back_halves(&mk(3)).unwrap(), (vec![4], vec![5, 6, 7]));
        assert!(write_back_halves(&mk(4)).is_err());
        assert!(write_back_halves(&mk(0)).is_err());
        let missing = WriteBackInputs {
            previous: None,
            ..mk(2)
        };
        assert!(write_back_halves(&missing).is_err());
    }

    #[test]
    fn unchanged_values_round_trip() {
        let window = [1, 2, 3, 4];
        let out = shift_right(&window, 1).unwrap();
        let w = WriteBackInputs {
            c: 1,
            k: 2,
            shift: 1,
            buffered_left: &out.left_half,
            buffered_right: &out.right_half,
            previous: None,
            first: None,
        };
        let (l, r) = write_back_halves(&w).unwrap();
        let (a, b) = shift_left(&l, &out.lanes, &r).unwrap();
        assert_eq!([a, b].concat(), window);
    }
}
