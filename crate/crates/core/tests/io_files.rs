//! Configuration files shipped with the repository and the files written for a run.

use std::fs;
use std::path::{Path, PathBuf};

use gradopt::bench::{named_case, BenchmarkCase, CASE_NAMES};
use gradopt::fem::StructuredQuadMesh;
use gradopt::io::{load_config, write_outputs, FieldDump, RunWriter, LOG_COLUMNS};
use gradopt::opt::{IterationRecord, RunRecord, Termination};
use proptest::prelude::*;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn without_name(mut case: BenchmarkCase) -> BenchmarkCase {
    case.name.clear();
    case
}

#[test]
fn shipped_configs_match_named_cases() {
    for name in CASE_NAMES {
        let cfg = load_config(&configs_dir().join(format!("{name}.toml"))).unwrap();
        assert!(cfg.warnings.is_empty(), "{name}: {:?}", cfg.warnings);
        assert_eq!(without_name(cfg.case), without_name(named_case(name).unwrap()), "{name}");
        assert_eq!(cfg.output.directory, PathBuf::from(format!("output/{name}")));
    }
}

#[test]
fn cantilever_reference_config() {
    let cfg = load_config(&configs_dir().join("cantilever_s2.toml")).unwrap();
    assert_eq!((cfg.case.nx, cfg.case.ny), (128, 64));
    assert_eq!(cfg.case.optimizer.m, 0.45);
    assert_eq!(cfg.case.interpolation.gamma_phi, 0.02);

    let cfg = load_config(&configs_dir().join("cantilever_s2_gchi0001.toml")).unwrap();
    assert_eq!(cfg.case.gamma_chi, 0.001);
    assert_eq!(cfg.case.optimizer.max_iter, 1000);
}

fn record(mesh: &StructuredQuadMesh, phi: f64, chi: Option<f64>, iterations: usize) -> RunRecord {
    let n = mesh.node_count();
    let rows = (1..=iterations)
        .map(|iter| IterationRecord {
            iter,
            compliance: 10.0 / iter as f64,
            objective: 11.0 / iter as f64,
            volume: phi,
            m_chi: chi.unwrap_or(phi),
            delta_phi: 0.1 / iter as f64,
            delta_chi: chi.map(|_| 0.2 / iter as f64),
            volume_residual: 0.0,
            lambda: 0.0,
            chi_forcing_max: chi.map(|_| 0.0),
        })
        .collect();
    RunRecord {
        rows,
        termination: Termination::Converged,
        final_compliance: 1.0,
        phi: vec![phi; n],
        chi: chi.map(|c| vec![c; n]),
        failure: None,
    }
}

fn png_pixels(path: &Path) -> (u32, u32, Vec<u8>) {
    let img = image::open(path).unwrap().into_luma8();
    (img.width(), img.height(), img.into_raw())
}

#[test]
fn rasters_use_round_half_up() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = StructuredQuadMesh::new(6, 3, 2.0, 1.0).unwrap();
    write_outputs(dir.path(), &mesh, &record(&mesh, 1.0, Some(0.5), 4)).unwrap();
    let (w, h, phi) = png_pixels(&dir.path().join("phi.png"));
    assert_eq!((w, h), (7, 4));
    assert!(phi.iter().all(|&p| p == 255));
    let (_, _, chi) = png_pixels(&dir.path().join("chi.png"));
    assert!(chi.iter().all(|&p| p == 128));
}

#[test]
fn log_has_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = StructuredQuadMesh::new(4, 2, 2.0, 1.0).unwrap();
    write_outputs(dir.path(), &mesh, &record(&mesh, 0.45, Some(0.3), 7)).unwrap();
    let text = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(text.lines().count(), 8);

    let mut reader = csv::Reader::from_path(dir.path().join("log.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, LOG_COLUMNS);
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows[2][col("iter")].parse::<usize>().unwrap(), 3);
    assert_eq!(rows[2][col("m_chi")].parse::<f64>().unwrap(), 0.3);
    assert_eq!(rows[1][col("delta_chi")].parse::<f64>().unwrap(), 0.1);

    // single-material runs leave delta_chi empty and write no grading files
    let single = tempfile::tempdir().unwrap();
    write_outputs(single.path(), &mesh, &record(&mesh, 0.45, None, 2)).unwrap();
    let mut reader = csv::Reader::from_path(single.path().join("log.csv")).unwrap();
    let row = reader.records().next().unwrap().unwrap();
    assert_eq!(&row[col("delta_chi")], "");
    assert!(!single.path().join("chi.png").exists());
    assert!(single.path().join("phi_final.txt").exists());
}

#[test]
fn periodic_dumps_follow_dump_every() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = named_case("cantilever_s2").unwrap().with_mesh_scale(0.125).unwrap();
    case.optimizer.max_iter = 5;
    case.optimizer.tol = 1e-12;
    let mesh = case.mesh().unwrap();
    let mut writer = RunWriter::create(dir.path(), 2, &mesh).unwrap();
    let mut observer = |row: &IterationRecord, phi: &[f64], chi: Option<&[f64]>| writer.observe(row, phi, chi);
    let rec = case.run(Some(&mut observer)).unwrap();
    writer.finish(&rec).unwrap();
    for (name, exists) in [
        ("phi_00002.txt", true),
        ("chi_00004.txt", true),
        ("phi_00003.txt", false),
        ("phi_final.txt", true),
        ("chi_final.txt", true),
    ] {
        assert_eq!(dir.path().join(name).exists(), exists, "{name}");
    }
    let last = FieldDump::read(&dir.path().join("chi_final.txt")).unwrap();
    assert_eq!(last.values, *rec.chi.as_ref().unwrap());
    assert_eq!(last.iteration, 5);
    let second = FieldDump::read(&dir.path().join("phi_00002.txt")).unwrap();
    assert_eq!((second.nodes_x, second.nodes_y, second.iteration), (17, 9, 2));
}

#[test]
fn unwritable_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("occupied");
    fs::write(&blocker, "not a directory").unwrap();
    let target = blocker.join("run");
    let mesh = StructuredQuadMesh::new(2, 1, 2.0, 1.0).unwrap();
    let err = write_outputs(&target, &mesh, &record(&mesh, 0.5, None, 1)).unwrap_err();
    assert!(err.to_string().contains(&target.display().to_string()), "{err}");
    assert!(RunWriter::create(&target, 0, &mesh).is_err());
}

proptest! {
    #[test]
    fn dump_round_trip_keeps_fifteen_digits(values in proptest::collection::vec(-1e3..1e3f64, 12), iter in 0usize..10_000) {
        let mesh = StructuredQuadMesh::new(3, 2, 2.5, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.txt");
        FieldDump::new(&mesh, "phi", iter, &values).unwrap().write(&path).unwrap();
        let back = FieldDump::read(&path).unwrap();
        prop_assert_eq!(back.iteration, iter);
        for (a, b) in back.values.iter().zip(&values) {
            prop_assert!((a - b).abs() <= 1e-15 * b.abs());
        }
    }
}
