//! Adaptive Gauss-Kronrod quadrature.
//!
//! A 7-point Gauss / 15-point Kronrod pair is applied per panel; the
//! panel with the largest error estimate is bisected until the summed
//! estimate meets the tolerance or the panel budget runs out. All nodes
//! are interior, so integrands may be defined only on the open interval
//! (support edges are never evaluated). Refinement order and the final
//! summation order are fully determined by the inputs, so results are
//! reproducible and independent of thread count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::CompensatedSum;

/// Kronrod nodes on [0, 1] half-interval (positive half, descending).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for the odd-indexed Kronrod nodes and the midpoint.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl QuadOptions {
    pub fn new(rel_tol: f64, abs_tol: f64, max_panels: usize) -> Self {
        Self { rel_tol, abs_tol, max_panels }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: f64,
    /// Summed per-panel |Kronrod - Gauss| estimates; conservative for
    /// the returned Kronrod value.
    pub error_estimate: f64,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    error: f64,
    id: u64,
    lo: f64,
    hi: f64,
    value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.id == other.id
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    /// Largest error first; ties broken by insertion id so the
    /// refinement order is a pure function of the inputs.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid);
    let mut kronrod = WGK[7] * f_mid;
    let mut gauss = WG[3] * f_mid;
    for (k, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Integrate `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opt: &QuadOptions) -> QuadResult {
    integrate_segmented(f, &[lo, hi], opt)
}

/// Integrate `f` over `[breakpoints[0], breakpoints[last]]`, seeding one
/// initial panel per consecutive breakpoint pair. Breakpoints must be
/// finite and nondecreasing; known peaks or scale changes make good
/// seeds.
pub fn integrate_segmented<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    opt: &QuadOptions,
) -> QuadResult {
    assert!(breakpoints.len() >= 2, "need at least two breakpoints");
    assert!(
        breakpoints.windows(2).all(|w| w[0] <= w[1]),
        "breakpoints must be sorted"
    );

    let mut heap: BinaryHeap<Panel> = BinaryHeap::new();
    let mut frozen: Vec<Panel> = Vec::new();
    let mut next_id = 0u64;
    let mut total_value = 0.0f64;
    let mut total_error = 0.0f64;

    let push = |lo: f64,
                hi: f64,
                heap: &mut BinaryHeap<Panel>,
                frozen: &mut Vec<Panel>,
                next_id: &mut u64,
                total_value: &mut f64,
                total_error: &mut f64| {
        let (value, error) = gauss_kronrod(&f, lo, hi);
        let panel = Panel { error, id: *next_id, lo, hi, value };
        *next_id += 1;
        *total_value += value;
        *total_error += error;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            frozen.push(panel); // cannot be split further in f64
        } else {
            heap.push(panel);
        }
    };

    for w in breakpoints.windows(2) {
        if w[0] < w[1] {
            push(w[0], w[1], &mut heap, &mut frozen, &mut next_id, &mut total_value, &mut total_error);
        }
    }
    if next_id == 0 {
        return QuadResult { value: 0.0, error_estimate: 0.0, panels: 0, converged: true };
    }

    let mut converged = true;
    loop {
        let target = opt.abs_tol.max(opt.rel_tol * total_value.abs());
        if total_error <= target {
            break;
        }
        if heap.is_empty() {
            converged = false;
            break;
        }
        if heap.len() + frozen.len() >= opt.max_panels {
            converged = false;
            break;
        }
        let worst = heap.pop().expect("heap checked nonempty");
        total_value -= worst.value;
        total_error -= worst.error;
        let mid = 0.5 * (worst.lo + worst.hi);
        push(worst.lo, mid, &mut heap, &mut frozen, &mut next_id, &mut total_value, &mut total_error);
        push(mid, worst.hi, &mut heap, &mut frozen, &mut next_id, &mut total_value, &mut total_error);
    }

    // Re-sum in spatial order with compensation; the incremental total
    // above accumulates rounding over many splits.
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    let mut value = CompensatedSum::new();
    let mut error = CompensatedSum::new();
    for p in &panels {
        value.add(p.value);
        error.add(p.error);
    }
    QuadResult {
        value: value.value(),
        error_estimate: error.value(),
        panels: panels.len(),
        converged,
    }
}
