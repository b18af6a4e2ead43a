use std::sync::Arc;
use std::time::Instant;
use selinv::factor::{factorize, normalize, FactorParams};
use selinv::inverse::selected_inversion;
use selinv::parallel::*;
use selinv::pipeline::{self, RunParams};
use selinv::verify::laplacian2d;

#[test]
fn engine_overhead_probe() {
    let a = laplacian2d(64);
    let prep = pipeline::prepare(&a, &RunParams::default()).unwrap();
    let lower = selinv::sparse::to_symmetric_lower(&a);
    let permuted = selinv::ordering::apply_symmetric_permutation(&lower, &prep.permutation).unwrap();
    let factor = factorize(&permuted, &prep.symbolic, FactorParams::default()).unwrap();

    let t = Instant::now();
    let mut f = factor.clone();
    normalize(&mut f).unwrap();
    let _seq = selected_inversion(f).unwrap();
    println!("sequential: {:.3}s", t.elapsed().as_secs_f64());

    for (pr, pc) in [(1usize, 1usize), (2, 1), (2, 2)] {
        let grid = ProcessorGrid::new(pr, pc).unwrap();
        let schedule = Arc::new(build_schedule(&prep.symbolic.etree, &grid, &prep.symbolic.blocks));
        let stores = distribute_factor(&factor, &grid).unwrap();
        let t = Instant::now();
        let _ = parallel_selected_inversion(stores, &prep.symbolic, &schedule, &grid,
            EngineParams { mode: EngineMode::Fast, collect_events: false, ..Default::default() }).unwrap();
        println!("engine {}x{}: {:.3}s", pr, pc, t.elapsed().as_secs_f64());
    }
}
