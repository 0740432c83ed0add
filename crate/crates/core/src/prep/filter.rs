use ndarray::{Array2, ArrayView2};

use crate::types::{FrameMatrix, SegmentTable};

/// Default smoothing order: a 6-tap binomial kernel.
pub const DEFAULT_FILTER_ORDER: usize = 4;

/// Binomial moving-average kernel of order `N` with `N + 2` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    order: usize,
    taps: Vec<f64>,
}

impl FilterKernel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap index aligned with the output frame in "same" mode.
    fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Builds `F_N` by convolving the two-tap average `[1/2, 1/2]` with itself
/// `N` more times. Every step halves integers, so taps are exact binomial
/// coefficients over `2^(N+1)` for any practical order.
pub fn build_filter(order: usize) -> FilterKernel {
    let base = [0.5, 0.5];
    let mut taps = base.to_vec();
    for _ in 0..order {
        taps = convolve_full(&taps, &base);
    }
    FilterKernel { order, taps }
}

fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Where smoothing runs: over the whole session, or restarted inside each
/// segment so that no frame outside a turn leaks into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingScope {
    #[default]
    Session,
    Segment,
}

/// Convolves every coefficient trajectory with the kernel.
///
/// "Same"-size output, kernel centered on tap `(len - 1) / 2`, edges handled
/// by replicating the first and last frame.
pub fn smooth_frames(frames: &FrameMatrix, kernel: &FilterKernel) -> FrameMatrix {
    frames.with_frames(smooth_rows(frames.frames(), kernel))
}

/// Smooths each segment's frame range independently. Frames outside every
/// segment are copied through.
pub fn smooth_frames_per_segment(
    frames: &FrameMatrix,
    table: &SegmentTable,
    kernel: &FilterKernel,
) -> FrameMatrix {
    let mut out = frames.frames().to_owned();
    for seg in table.segments() {
        if let Some((s, e)) = frames.frame_range(seg.start, seg.end) {
            let block = smooth_rows(frames.frames().slice(ndarray::s![s..=e, ..]), kernel);
            out.slice_mut(ndarray::s![s..=e, ..]).assign(&block);
        }
    }
    frames.with_frames(out)
}

pub fn smooth_with_scope(
    frames: &FrameMatrix,
    table: &SegmentTable,
    kernel: &FilterKernel,
    scope: SmoothingScope,
) -> FrameMatrix {
    match scope {
        SmoothingScope::Session => smooth_frames(frames, kernel),
        SmoothingScope::Segment => smooth_frames_per_segment(frames, table, kernel),
    }
}

fn smooth_rows(x: ArrayView2<'_, f64>, kernel: &FilterKernel) -> Array2<f64> {
    let n = x.nrows() as isize;
    let c = kernel.center() as isize;
    let mut out = Array2::zeros(x.dim());
    for t in 0..n {
        let mut row = out.row_mut(t as usize);
        for (m, &w) in kernel.taps.iter().enumerate() {
            let src = (t + m as isize - c).clamp(0, n - 1) as usize;
            row.scaled_add(w, &x.row(src));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn trajectory(values: &[f64]) -> FrameMatrix {
        let m = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        FrameMatrix::new("t", m, 0.01, 0.0).unwrap()
    }

    #[test]
    fn low_orders() {
        assert_eq!(build_filter(0).taps(), &[0.5, 0.5]);
        assert_eq!(build_filter(1).taps(), &[0.25, 0.5, 0.25]);
        assert_eq!(build_filter(2).taps(), &[0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn impulse_response() {
        let out = smooth_frames(&trajectory(&[0.0, 0.0, 1.0, 0.0, 0.0]), &build_filter(1));
        assert_eq!(out.frames().column(0).to_vec(), vec![0.0, 0.25, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn alternating_signal_is_cancelled() {
        // .25 * (-1) + .5 * (+1) + .25 * (-1) = 0 at every interior frame.
        let x: Vec<f64> = (0..9).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let out = smooth_frames(&trajectory(&x), &build_filter(1));
        for v in out.frames().column(0).iter().skip(1).take(7) {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn edges_are_replicated_not_zero_padded() {
        let out = smooth_frames(&trajectory(&[4.0, 4.0, 4.0]), &build_filter(6));
        assert_eq!(out.frames().column(0).to_vec(), vec![4.0, 4.0, 4.0]);
    }

    #[test]
    fn per_segment_scope_ignores_neighbours() {
        let fm = trajectory(&[0.0, 0.0, 0.0, 9.0, 9.0, 9.0]);
        let table = SegmentTable::new(
            "t",
            vec![crate::types::Segment::labeled(0.0, 0.03, "a").unwrap(),
                 crate::types::Segment::labeled(0.03, 0.06, "b").unwrap()],
        )
        .unwrap();
        let k = build_filter(2);
        let whole = smooth_frames(&fm, &k);
        let per = smooth_frames_per_segment(&fm, &table, &k);
        assert!(whole.frames()[[2, 0]] > 0.0);
        assert_eq!(per.frames().column(0).to_vec(), vec![0.0, 0.0, 0.0, 9.0, 9.0, 9.0]);
    }

    #[test]
    fn shape_and_metadata_preserved() {
        let fm = FrameMatrix::new("x", array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], 0.02, 3.0).unwrap();
        let out = smooth_frames(&fm, &build_filter(3));
        assert_eq!(out.frames().dim(), (3, 2));
        assert_eq!((out.frame_period(), out.start_time(), out.session_id()), (0.02, 3.0, "x"));
    }

    proptest! {
        #[test]
        fn taps_sum_to_one_and_are_symmetric(order in 0usize..40) {
            let k = build_filter(order);
            prop_assert_eq!(k.taps().len(), order + 2);
            prop_assert!((k.taps().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in k.taps().iter().zip(k.taps().iter().rev()) {
                prop_assert_eq!(a, b);
            }
            prop_assert!(k.taps().iter().all(|&t| t > 0.0));
        }

        #[test]
        fn smoothing_is_a_convex_combination(
            xs in prop::collection::vec(-100.0f64..100.0, 1..60),
            order in 0usize..8,
        ) {
            let out = smooth_frames(&trajectory(&xs), &build_filter(order));
            let max_in = xs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let max_out = out.frames().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(max_out <= max_in + 1e-12);
        }

        #[test]
        fn constants_pass_through(c in -1e3f64..1e3, n in 1usize..50, order in 0usize..10) {
            let out = smooth_frames(&trajectory(&vec![c; n]), &build_filter(order));
            for v in out.frames().iter() {
                prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }
    }
}
