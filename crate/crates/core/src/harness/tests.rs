use super::*;
use crate::synth::{camera_ring, uv_sphere, ProceduralScene};
use nalgebra::Vector3;

fn small_scene(dir: &Path) -> (ProceduralScene, ViewManifest) {
    let mesh = uv_sphere(Vector3::zeros(), 1.0, 24, 16, |d| [0.5 + 0.4 * d.x, 0.5 + 0.4 * d.y, 0.5 + 0.4 * (5.0 * d.z).sin()]);
    let cameras = camera_ring(6, 3.0, 0.5, Vector3::zeros(), 50.0, 48, 40).unwrap();
    let scene = ProceduralScene { mesh, cameras };
    let manifest = scene.write_dataset(dir).unwrap();
    (scene, manifest)
}

fn cfg(metrics: &[Metric]) -> EvalConfig {
    EvalConfig {
        metrics: metrics.to_vec(),
        metric: MetricConfig { patch: 5, ..Default::default() },
        ..Default::default()
    }
}

fn write_external(dir: &Path, manifest: &ViewManifest, mask_valid: bool) {
    std::fs::create_dir_all(dir).unwrap();
    for v in manifest.views() {
        let photo = v.load_photo().unwrap();
        photo.save(&rephoto_path(dir, &v.id)).unwrap();
        Mask::new(photo.width(), photo.height(), mask_valid).save(&mask_path(dir, &v.id)).unwrap();
    }
}

#[test]
fn self_comparison_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, manifest) = small_scene(tmp.path());
    let ext = tmp.path().join("ext");
    write_external(&ext, &manifest, true);
    let plan = split(&manifest, 3, 0).unwrap();
    let cfg = EvalConfig { mode: EvalMode::External, ..cfg(&Metric::ALL) };
    let report = evaluate(&manifest, &RephotoSource::Directory(ext), Some(&plan), &cfg).unwrap();
    assert_eq!(report.aggregate.completeness, 1.0);
    for m in Metric::ALL {
        assert!(report.aggregate.errors[&m].unwrap() < 1e-12, "{m}");
        assert!(report.boxplot.errors[&m].unwrap().max < 1e-12);
    }
    assert_eq!(report.per_view.len(), 6);
    assert_eq!(report.per_fold.len(), 3);
    assert!(report.config.cross_validation);
}

#[test]
fn empty_masks_give_nulls() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, manifest) = small_scene(tmp.path());
    let ext = tmp.path().join("ext");
    write_external(&ext, &manifest, false);
    let cfg = EvalConfig { mode: EvalMode::External, ..cfg(&[Metric::Ncc, Metric::Cbcr]) };
    let report = evaluate(&manifest, &RephotoSource::Directory(ext), None, &cfg).unwrap();
    assert_eq!(report.aggregate.completeness, 0.0);
    assert_eq!(report.aggregate.errors[&Metric::Ncc], None);
    assert_eq!(report.aggregate.null_views[&Metric::Cbcr], 6);
    assert_eq!(report.boxplot.errors[&Metric::Ncc], None);
    assert!(!report.config.cross_validation);
    let csv = String::from_utf8(report.to_csv().unwrap()).unwrap();
    assert!(csv.starts_with("view_id,fold,completeness,ncc,cbcr\n"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",0,,"));
}

#[test]
fn internal_and_external_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let (scene, manifest) = small_scene(tmp.path());
    let model = Model::Mesh(crate::degrade::texture_noise(
        &scene.mesh,
        &crate::degrade::DegradationParams { n_tex: 0.1, ..Default::default() },
    )
    .unwrap());
    let plan = split(&manifest, 2, 5).unwrap();
    let out = tmp.path().join("rephotos_{fold}");
    let internal_cfg = EvalConfig { rephoto_dir: Some(out.clone()), ..cfg(&Metric::ALL) };
    let internal = evaluate(&manifest, &RephotoSource::Model(model), Some(&plan), &internal_cfg).unwrap();
    assert!(internal.aggregate.errors[&Metric::Ncc].unwrap() > 0.0);
    let external_cfg = EvalConfig { mode: EvalMode::External, ..cfg(&Metric::ALL) };
    let mut external = evaluate(&manifest, &RephotoSource::Directory(out), Some(&plan), &external_cfg).unwrap();
    assert_eq!(external.config.mode, EvalMode::External);
    external.config.mode = EvalMode::InternalMesh;
    assert_eq!(internal.to_json().unwrap(), external.to_json().unwrap());
}

#[test]
fn aggregates_ignore_view_order() {
    let tmp = tempfile::tempdir().unwrap();
    let (scene, manifest) = small_scene(tmp.path());
    let reversed = ViewManifest::new(manifest.views().iter().rev().cloned().collect()).unwrap();
    let model = RephotoSource::Model(Model::Mesh(crate::degrade::geometry_noise(
        &scene.mesh,
        &crate::degrade::DegradationParams { n_geom: 0.01, ..Default::default() },
    )
    .unwrap()));
    let c = cfg(&[Metric::Ncc, Metric::Census]);
    let a = evaluate(&manifest, &model, None, &c).unwrap();
    let b = evaluate(&reversed, &model, None, &c).unwrap();
    assert_eq!(a.aggregate, b.aggregate);
    assert!(a.aggregate.errors[&Metric::Ncc].unwrap() > 0.0);
}

#[test]
fn writes_error_images() {
    let tmp = tempfile::tempdir().unwrap();
    let (scene, manifest) = small_scene(tmp.path());
    let errs = tmp.path().join("errors");
    let c = EvalConfig { error_dir: Some(errs.clone()), timings: true, ..cfg(&[Metric::Zssd]) };
    let report = evaluate(&manifest, &RephotoSource::Model(Model::Mesh(scene.mesh)), None, &c).unwrap();
    assert!(report.timings.as_ref().unwrap().per_view.len() == 6);
    assert!(report.to_json().unwrap().contains("total_seconds"));
    let img = ErrorImage::load_pfm(&error_path(&errs, "v000", Metric::Zssd)).unwrap();
    assert!(img.defined_count() > 0);
    assert!(img.iter_defined().all(|v| v == 0.0));
}

#[test]
fn source_must_match_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let (scene, manifest) = small_scene(tmp.path());
    let mesh = RephotoSource::Model(Model::Mesh(scene.mesh));
    let bad = EvalConfig { mode: EvalMode::InternalPointcloud, ..cfg(&[Metric::Ncc]) };
    assert!(matches!(evaluate(&manifest, &mesh, None, &bad), Err(Error::Validation(_))));
    let ext = EvalConfig { mode: EvalMode::External, ..cfg(&[Metric::Ncc]) };
    assert!(evaluate(&manifest, &mesh, None, &ext).is_err());
    let missing = RephotoSource::Directory(tmp.path().join("nope"));
    assert!(matches!(evaluate(&manifest, &missing, None, &ext), Err(Error::Io { .. })));
    let dup = cfg(&[Metric::Ncc, Metric::Ncc]);
    assert!(evaluate(&manifest, &mesh, None, &dup).is_err());
}

#[test]
fn report_json_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let (scene, manifest) = small_scene(tmp.path());
    let plan = split(&manifest, 3, 2).unwrap();
    let report = evaluate(&manifest, &RephotoSource::Model(Model::Mesh(scene.mesh)), Some(&plan), &cfg(&[Metric::Ncc])).unwrap();
    let path = tmp.path().join("report.json");
    report.save_json(&path).unwrap();
    assert_eq!(EvaluationReport::load(&path).unwrap(), report);
    assert!(std::fs::read_to_string(&path).unwrap().contains("\"mode\": \"internal-mesh\""));
}
