//! Allocation tracking for memory audits. Including this module installs a
//! counting global allocator in the test binary.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use gcmvsc::pipeline::{cluster, BenchConfig};

struct Tracking;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Tracking {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            record(layout.size());
        }
        ptr
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc_zeroed(layout);
        if !ptr.is_null() {
            record(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let out = System.realloc(ptr, layout, new_size);
        if !out.is_null() {
            LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
            record(new_size);
        }
        out
    }
}

fn record(size: usize) {
    let live = LIVE.fetch_add(size, Ordering::SeqCst) + size;
    PEAK.fetch_max(live, Ordering::SeqCst);
    LARGEST.fetch_max(size, Ordering::SeqCst);
}

#[global_allocator]
static GLOBAL: Tracking = Tracking;

/// Run the benchmark configuration at `n` samples and check that nothing
/// quadratic in `n` is allocated: the largest single allocation fits the
/// `n x (p + Σ d_v + V k)` working set and the live peak stays within three
/// times it.
pub fn audit(n: usize) -> Result<String, String> {
    let config = BenchConfig {
        rounds: 3,
        ..BenchConfig::default()
    };
    let ds = config.dataset(n).map_err(|e| e.to_string())?;
    let baseline = LIVE.load(Ordering::SeqCst);
    PEAK.store(baseline, Ordering::SeqCst);
    LARGEST.store(0, Ordering::SeqCst);

    let run = cluster(&ds, &config.options()).map_err(|e| e.to_string())?;
    if run.labels.len() != n {
        return Err(format!("{} labels for {n} samples", run.labels.len()));
    }

    let width = config.p + config.views * config.dim + config.views * config.k;
    let working_set = 8 * n * width;
    let largest = LARGEST.load(Ordering::SeqCst);
    let peak = PEAK.load(Ordering::SeqCst) - baseline;
    let summary = format!("largest allocation {largest} B, peak {peak} B, working set {working_set} B, n x n would be {} B", 8 * n * n);
    if largest > working_set || peak > 3 * working_set {
        return Err(summary);
    }
    Ok(summary)
}
