use geoscatter::mesh::{icosphere, Point};
use geoscatter::scattering::{transported_signal_probe, ScatteringConfig, Transform, WarpFamily};
use geoscatter::spectral::SpectralBasis;

fn signal(p: &Point) -> f64 {
    let r = p.norm();
    (p.z / r) * (p.x / r) + 0.5 * (p.y / r)
}

#[test]
fn twist_grows_while_rotation_stays_at_discretization_level() {
    let mesh = icosphere(4, 1.0).unwrap();
    let basis = SpectralBasis::from_mesh(&mesh, 150).unwrap();
    let config = ScatteringConfig {
        j_max: 0,
        depth: 2,
        j_min: -4,
        k: 150,
        ..Default::default()
    };
    let eps = [0.02, 0.04, 0.08, 0.16];
    let rotation = WarpFamily::Rotation {
        axis: Point::new(1.0, 1.0, 0.0),
    };
    let rot =
        transported_signal_probe(&basis, &mesh, &signal, &rotation, &eps, &config, Transform::NonWindowed).unwrap();
    let twist = transported_signal_probe(
        &basis,
        &mesh,
        &signal,
        &WarpFamily::LatitudeTwist,
        &eps,
        &config,
        Transform::NonWindowed,
    )
    .unwrap();

    for i in 1..eps.len() {
        assert!(rot[i].1 <= 1.1 * rot[1].1, "rotation distance grows: {rot:?}");
        assert!(rot[i].1 <= 0.1 * twist[i].1, "rotation {rot:?} twist {twist:?}");
    }
    for w in twist.windows(2) {
        let ratio = w[1].1 / w[0].1;
        assert!((1.5..=2.5).contains(&ratio), "twist {twist:?}");
    }
}
