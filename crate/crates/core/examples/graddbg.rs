// scratch diagnostic
use t2_core::field::{DiffusionField, DriftField};
use t2_core::grid::TimeGrid;
use t2_core::pde::*;

fn main() {
    let diff = DiffusionField::identity(1);
    for (mag, t, steps) in [(1.0, 0.5, 500usize), (1.0, 0.25, 250), (2.0, 0.5, 500), (1.0, 1.0, 1000)] {
        let drift = DriftField::sign(1, mag);
        let grid = PdeGrid::new(1, 6.0, 0.01).unwrap();
        let times = TimeGrid::new(t, steps).unwrap();
        let u = zvonkin_solve(&drift, &diff, 0.0, &grid, &times).unwrap();
        let g = gradient_field(&u);
        let mut sup = 0.0_f64;
        let mut arg = (0, 0);
        for level in 0..=times.steps() {
            for node in 0..grid.node_count() {
                if !grid.is_interior(node, 0.5) { continue; }
                let v = g.at(level, node, 0).abs();
                if v > sup { sup = v; arg = (level, node); }
            }
        }
        println!("mag={mag} T={t}: sup|grad v| = {sup:.4} at t={:.3} x={:.3}", times.time(arg.0), grid.coord(arg.1));
    }
}
