use fdasynth_core::ingest::{
    check, filter_trajectories, ingest, normalize, parse_signals, read_ndjson, write_ndjson, FilterPolicy, Orientation,
    ProjectedPoint, ProjectedTrajectory, Projection, ProjectionMode,
};
use fdasynth_core::toy::{toy_signals, write_signals_csv, ToyDataSpec};
use proptest::prelude::*;

/// Great-circle distance on a sphere of radius `r`.
fn haversine(r: f64, (lat1, lon1): (f64, f64), (lat2, lon2): (f64, f64)) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * r * a.sqrt().asin()
}

#[test]
fn transverse_mercator_matches_reference_points() {
    let north = Projection::Tmerc { zone: 32, north: true };
    // On the central meridian the easting is the false easting, and the
    // northing is 0.9996 times the WGS84 meridian arc (4 984 944.378 m to 45°).
    let (x, y) = north.forward(0.0, 9.0);
    assert!((x - 500_000.0).abs() < 1e-6 && y.abs() < 1e-6);
    let (x, y) = north.forward(45.0, 9.0);
    assert!((x - 500_000.0).abs() < 1e-6);
    assert!((y - 0.9996 * 4_984_944.378).abs() < 0.01, "{y}");
    // Symmetric about the central meridian.
    let (xe, ye) = north.forward(45.5, 10.0);
    let (xw, yw) = north.forward(45.5, 8.0);
    assert!((xe - 500_000.0 + (xw - 500_000.0)).abs() < 1e-6);
    assert!((ye - yw).abs() < 1e-6);
    let south = Projection::Tmerc { zone: 32, north: false };
    assert!((south.forward(-0.0, 9.0).1 - 10_000_000.0).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn local_projection_is_nearly_isometric(
        lat0 in -60.0f64..60.0, lon0 in -170.0f64..170.0,
        dx in -3000.0f64..3000.0, dy in -3000.0f64..3000.0,
    ) {
        let proj = Projection::local(lat0, lon0);
        let (lat, lon) = proj.inverse_local(dx, dy).unwrap();
        let (x, y) = proj.forward(lat, lon);
        prop_assert!((x - dx).abs() < 1e-6 && (y - dy).abs() < 1e-6);
        // Within a few kilometres the plane and the sphere agree to 0.1%.
        let planar = dx.hypot(dy);
        let sphere = haversine(fdasynth_core::ingest::EARTH_RADIUS_M, (lat0, lon0), (lat, lon));
        prop_assert!((planar - sphere).abs() <= 1e-3 * planar + 1e-6, "{} vs {}", planar, sphere);
    }

    #[test]
    fn filtering_partitions_and_is_idempotent(
        walks in proptest::collection::vec(
            (2usize..9, 1.0f64..2500.0, 1i64..2400, 1.0f64..1500.0), 0..12),
    ) {
        let trajs: Vec<ProjectedTrajectory> = walks
            .iter()
            .enumerate()
            .map(|(i, &(n, step, dt, acc))| ProjectedTrajectory {
                trajectory_id: format!("t{i}"),
                user_id: "u".into(),
                points: (0..n)
                    .map(|k| ProjectedPoint {
                        x: k as f64 * step,
                        y: 0.0,
                        timestamp: k as i64 * dt,
                        accuracy: Some(acc),
                    })
                    .collect(),
            })
            .collect();
        let policy = FilterPolicy::default();
        let (kept, dropped) = filter_trajectories(trajs.clone(), &policy);
        prop_assert_eq!(kept.len() + dropped.len(), trajs.len());
        for t in &kept {
            prop_assert!(check(t, &policy).is_none());
        }
        for d in &dropped {
            prop_assert_eq!(check(&d.trajectory, &policy), Some(d.reason));
        }
        let (again, none) = filter_trajectories(kept.clone(), &policy);
        prop_assert_eq!(again, kept);
        prop_assert!(none.is_empty());
    }

    #[test]
    fn normalization_round_trips(
        pts in proptest::collection::vec((-5e5f64..5e5, -5e5f64..5e5, 0i64..10_000), 2..30),
        min0 in proptest::bool::ANY,
    ) {
        let mut pts = pts;
        pts.sort_by_key(|p| p.2);
        let traj = ProjectedTrajectory {
            trajectory_id: "t".into(),
            user_id: "u".into(),
            points: pts
                .iter()
                .map(|&(x, y, timestamp)| ProjectedPoint { x, y, timestamp, accuracy: None })
                .collect(),
        };
        let orientation = if min0 { Orientation::MinToZero } else { Orientation::MaxToZero };
        // Degenerate axes are rejected; nothing else to check then.
        if let Ok((out, params)) = normalize(std::slice::from_ref(&traj), orientation) {
            let t0 = traj.points[0].timestamp;
            for (p, q) in traj.points.iter().zip(&out[0].points) {
                prop_assert!(q.iter().all(|v| (0.0..=1.0).contains(v)));
                let back = params.denormalize_point(*q);
                let orig = [p.x, p.y, (p.timestamp - t0) as f64];
                for a in 0..3 {
                    prop_assert!((back[a] - orig[a]).abs() <= 1e-9 * (1.0 + orig[a].abs()));
                }
            }
        }
    }
}

#[test]
fn toy_signals_survive_ingest_and_ndjson() {
    let spec = ToyDataSpec::new(2, 4, 0.05, 5);
    let trajs = toy_signals(&spec, 40).unwrap();
    let mut csv = Vec::new();
    write_signals_csv(&mut csv, &trajs).unwrap();
    let parsed = parse_signals(csv.as_slice()).unwrap();
    assert_eq!(parsed.trajectories.len(), 8);
    assert!(parsed.rejects.is_empty() && parsed.excluded.is_empty());

    let out = ingest(
        csv.as_slice(),
        ProjectionMode::Local,
        &FilterPolicy::default(),
        Orientation::MaxToZero,
    )
    .unwrap();
    assert_eq!(out.trajectories.len(), 8);
    assert!(out.rejects.trajectories.is_empty());
    for t in &out.trajectories {
        assert_eq!(t.points.len(), 40);
        assert!(t.points.windows(2).all(|w| w[1][2] > w[0][2]));
    }
    let mut buf = Vec::new();
    write_ndjson(&mut buf, &out.trajectories).unwrap();
    assert_eq!(read_ndjson(buf.as_slice()).unwrap(), out.trajectories);
}

#[test]
fn malformed_rows_are_rejected_with_line_numbers() {
    let input = "user_id,trajectory_id,timestamp,lat,lon\n\
                 u,a,0,45.0,9.0\n\
                 u,a,oops,45.0,9.0\n\
                 u,a,60,95.0,9.0\n\
                 u,a,120,45.001,9.001\n";
    let parsed = parse_signals(input.as_bytes()).unwrap();
    let lines: Vec<u64> = parsed.rejects.iter().map(|r| r.line).collect();
    assert_eq!(lines, [3, 4]);
    assert_eq!(parsed.trajectories[0].points.len(), 2);
    assert!(parse_signals("user_id,timestamp,lat,lon\n".as_bytes()).is_err());
}
