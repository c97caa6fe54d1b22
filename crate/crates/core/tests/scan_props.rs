//! Angular scans, boundaries and their writers.

use momsos_core::exactness::{Certifier, Classification, Tolerances};
use momsos_core::relaxation::{four_points, nonconvex};
use momsos_core::scan::{
    boundary_with, feasible_samples, linear_objective, read_boundary_csv, read_scan_csv, render_svg, scan_with,
    write_boundary_csv, write_scan_csv, AngularScan, BoundaryStatus, ScanRecord,
};

fn direction(theta_deg: f64) -> [f64; 2] {
    let t = theta_deg.to_radians();
    [t.cos(), t.sin()]
}

#[test]
fn exactness_only_grows_with_the_order() {
    let pop = four_points();
    let one = scan_with(&Certifier::new(&pop, 1, Tolerances::default()).unwrap(), 72).unwrap();
    let two = scan_with(&Certifier::new(&pop, 2, Tolerances::default()).unwrap(), 72).unwrap();
    assert!(one.count(Classification::NotExact) > 0);
    for (a, b) in one.records.iter().zip(&two.records) {
        assert_eq!(a.theta_deg, b.theta_deg);
        assert!(a.v_relax <= b.v_relax + 1e-7, "theta {}", a.theta_deg);
        if a.classification == Classification::Exact {
            assert_eq!(b.classification, Classification::Exact, "theta {}", a.theta_deg);
        }
    }
    assert_eq!(two.count(Classification::Exact), 72);
}

#[test]
fn oracle_values_bound_the_relaxation() {
    let pop = nonconvex();
    let scan = scan_with(&Certifier::new(&pop, 1, Tolerances::default()).unwrap(), 36).unwrap();
    for rec in &scan.records {
        let oracle = rec.v_oracle.expect("fixture has a box");
        assert!(rec.v_relax <= oracle + 1e-7, "theta {}", rec.theta_deg);
        if rec.classification == Classification::NotExact {
            assert!(oracle - rec.v_relax > 1e-5, "theta {}", rec.theta_deg);
        }
    }
}

#[test]
fn boundary_points_support_the_feasible_samples() {
    let pop = nonconvex();
    let certifier = Certifier::new(&pop, 2, Tolerances::default()).unwrap();
    let poly = boundary_with(&certifier, 36).unwrap();
    let samples = feasible_samples(&pop, 81).unwrap();
    assert!(!samples.is_empty());
    for p in &poly.points {
        assert_eq!(p.status, BoundaryStatus::Optimal);
        let y = p.point.unwrap();
        let d = direction(p.theta_deg);
        let h = d[0] * y[0] + d[1] * y[1];
        for s in &samples {
            assert!(d[0] * s[0] + d[1] * s[1] <= h + 1e-6, "theta {}", p.theta_deg);
        }
        // the support point is the relaxation optimum of the negated direction
        let v = certifier.solve(&linear_objective(p.theta_deg).scale(-1.0)).unwrap().value;
        assert!((v + h).abs() <= 1e-6);
    }
}

#[test]
fn csv_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let scan = AngularScan {
        order: 1,
        records: vec![
            ScanRecord { theta_deg: 0.0, v_relax: -0.1, v_oracle: Some(0.0), oracle_error: None, classification: Classification::NotExact },
            ScanRecord { theta_deg: 90.0, v_relax: 1.0 / 3.0, v_oracle: None, oracle_error: None, classification: Classification::Exact },
        ],
    };
    let path = dir.path().join("scan.csv");
    write_scan_csv(&scan, &path).unwrap();
    let back = read_scan_csv(&std::fs::read_to_string(&path).unwrap(), 1).unwrap();
    assert_eq!(back, scan);

    let poly = boundary_with(&Certifier::new(&four_points(), 2, Tolerances::default()).unwrap(), 8).unwrap();
    let path = dir.path().join("boundary.csv");
    write_boundary_csv(&poly, &path).unwrap();
    let back = read_boundary_csv(&std::fs::read_to_string(&path).unwrap(), 2).unwrap();
    assert_eq!(back, poly);
}

#[test]
fn svg_draws_one_ray_per_angle_with_class_colors() {
    let pop = four_points();
    let certifier = Certifier::new(&pop, 1, Tolerances::default()).unwrap();
    let scan = scan_with(&certifier, 48).unwrap();
    let boundary = boundary_with(&certifier, 48).unwrap();
    let svg = render_svg(&scan, &boundary, &feasible_samples(&pop, 31).unwrap());
    assert_eq!(svg.matches("class=\"ray\"").count(), 48);
    let red = svg.matches("data-classification=\"not_exact\"").count();
    assert_eq!(red, scan.count(Classification::NotExact));
    assert!(red > 0);
    for line in svg.lines().filter(|l| l.contains("data-classification=\"not_exact\"")) {
        assert!(line.contains("#d62728"));
    }
}
