use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nematic_core::flow::FlowState;
use nematic_core::grid::{BcMode, DirectorField, Grid, ScalarField, VelocityField};
use nematic_core::simulator::{EnergyRecord, SimState};
use nematic_workbench::io::*;

fn wild(rng: &mut StdRng) -> f64 {
    // spread over many magnitudes and both signs
    let mant: f64 = rng.random_range(-1.0..1.0);
    let exp: i32 = rng.random_range(-300..300);
    mant * 10f64.powi(exp)
}

#[test]
fn records_round_trip_bit_identical() {
    let mut rng = StdRng::seed_from_u64(11);
    let recs: Vec<EnergyRecord> = (0..100)
        .map(|_| {
            let mut a = [0.0; 11];
            for x in a.iter_mut() {
                *x = wild(&mut rng);
            }
            EnergyRecord::from_array(a)
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_records(&recs, &path).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in recs.iter().zip(&back) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn records_header_is_exact() {
    let text = format_records(&[EnergyRecord::default()]);
    assert!(text.starts_with("t,kinetic,elastic,potential,total,dissip_visc,dissip_dir,A,v_H1,residual_L2,div_inf\n"));
    let wrong = text.replace("v_H1", "v_h1");
    assert!(matches!(parse_records(&wrong, Path::new("x.csv")), Err(RecordsError::Schema { .. })));
}

fn random_state(rng: &mut StdRng, grid: &Grid, m: usize) -> SimState {
    let mut v = VelocityField::zeros(grid);
    for x in v.u_mut().data_mut() {
        *x = rng.random_range(-1.0..1.0);
    }
    for x in v.v_mut().data_mut() {
        *x = rng.random_range(-1.0..1.0);
    }
    v.apply_bc();
    let pv: Vec<f64> = (0..grid.cell_count()).map(|_| wild(rng)).collect();
    let p = ScalarField::from_interior(grid, &pv);
    let mut d = DirectorField::zeros(grid, m);
    for k in 0..m {
        let vals: Vec<f64> = (0..grid.cell_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        d.set_interior(k, &vals);
    }
    d.apply_bc(None).unwrap();
    SimState { t: rng.random_range(0.0..10.0), flow: FlowState { v, p }, director: d }
}

#[test]
fn snapshot_round_trip_bit_identical() {
    let mut rng = StdRng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    for (bc, m) in [(BcMode::FreeSlip, 2), (BcMode::Periodic, 3)] {
        let grid = Grid::new(7, 5, 1.3, 0.9, bc).unwrap();
        let state = random_state(&mut rng, &grid, m);
        let path = dir.path().join(format!("{}.snap", bc.name()));
        snapshot_write(&state, &path).unwrap();
        let back = snapshot_read(&path, None).unwrap();
        assert_eq!(back.t.to_bits(), state.t.to_bits());
        assert_eq!(back, state);
        assert_eq!(Snapshot::from_state(&back).to_bytes(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn snapshot_errors() {
    let mut rng = StdRng::seed_from_u64(9);
    let grid = Grid::new(4, 4, 1.0, 1.0, BcMode::Periodic).unwrap();
    let bytes = Snapshot::from_state(&random_state(&mut rng, &grid, 2)).to_bytes();
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.snap");
    std::fs::write(&short, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(snapshot_read(&short, None), Err(SnapshotError::Size { .. })));
    let magic = dir.path().join("magic.snap");
    let mut m = bytes.clone();
    m[..5].copy_from_slice(b"NEMQ0");
    std::fs::write(&magic, m).unwrap();
    assert!(matches!(snapshot_read(&magic, None), Err(SnapshotError::Version)));
}
