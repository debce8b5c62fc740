//! Peak-allocation accounting. Runs in its own binary so the counting
//! allocator sees only these tests, which are serialized.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use mvsc_core::pipeline::run_on_features;
use mvsc_core::propagate::prepare_views;
use mvsc_core::spectral::implicit_degrees;
use mvsc_core::{synth_multiview, DenseMatrix, FactorMatrix, Normalization, PipelineConfig};

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static SERIAL: Mutex<()> = Mutex::new(());

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

/// Peak bytes allocated on top of what was live when `f` started.
fn peak_extra<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let base = CURRENT.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let out = f();
    (out, PEAK.load(Ordering::SeqCst) - base)
}

#[test]
fn implicit_degrees_allocate_linear_memory() {
    let _g = SERIAL.lock().unwrap();
    let (n, m) = (20_000, 12);
    let b = FactorMatrix::new(DenseMatrix::from_fn(n, m, |i, j| ((i * 31 + j * 7) % 13) as f64 / 13.0 + 0.01));
    let (d, extra) = peak_extra(|| implicit_degrees(&b).unwrap());
    assert_eq!(d.values.len(), n);
    // the output vector plus O(m) scratch; n x n would be 3.2 GB
    assert!(extra <= 8 * (2 * n + 64 * m) + 4096, "{extra} bytes");
}

#[test]
fn pipeline_peak_memory_grows_linearly() {
    let _g = SERIAL.lock().unwrap();
    let cfg = PipelineConfig::new(10);
    let measure = |n: usize| {
        let ds = synth_multiview(n, 10, 2, 0.1, 0).unwrap();
        let feats = prepare_views(&ds, Normalization::SymSelfloop, None).unwrap();
        // warm the thread pool before measuring
        run_on_features(&feats, &cfg).unwrap();
        peak_extra(|| run_on_features(&feats, &cfg).unwrap()).1
    };
    let small = measure(1_000);
    let large = measure(10_000);
    let ratio = large as f64 / small as f64;
    assert!(ratio <= 13.0, "peak {small} -> {large} bytes, ratio {ratio:.2}");
}
