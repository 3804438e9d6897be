use proptest::prelude::*;

use targetwave::config::Config;
use targetwave::integrator::{wrap_angle, SimState};
use targetwave::io::{checkpoint_bytes, parse_checkpoint, CsvTable};
use targetwave::{Grid2D, ScalarField};

fn config_text(n: usize, l: f64, eps: f64, dt: f64, sigma: f64, seed: u64, eps_list: &[f64], gaussian_j: bool) -> String {
    let list: Vec<String> = eps_list.iter().map(|v| format!("{v:?}")).collect();
    let j = if gaussian_j {
        format!("j = gaussian\nj_sigma = {sigma:?}\n")
    } else {
        "j = bessel-smoother\n".to_string()
    };
    format!(
        "[grid]\nnx = {n}\nny = {n}\nlx = {l:?}\nly = {l:?}\n\n[kernels]\nl = rational\n{j}\n\
         [forcing]\nname = gaussian\namplitude = -2\n\n[run]\nepsilon = {eps:?}\ndt = {dt:?}\nseed = {seed}\n\n\
         [analysis]\nepsilons = {}\n",
        list.join(", ")
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips_through_canonical_text(
        n in (4usize..150).prop_map(|k| 2 * k),
        l in 1.0f64..1e4,
        eps in 1e-6f64..2.0,
        dt in 1e-4f64..10.0,
        sigma in 0.1f64..5.0,
        seed in any::<u64>(),
        eps_list in prop::collection::vec(0.05f64..1.0, 1..6),
        gaussian_j in any::<bool>(),
    ) {
        let cfg = Config::parse(&config_text(n, l, eps, dt, sigma, seed, &eps_list, gaussian_j)).unwrap();
        let text = cfg.to_canonical_string();
        let back = Config::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_canonical_string(), text);
    }

    #[test]
    fn checkpoint_round_trips_bitwise(
        nx in (4usize..9).prop_map(|k| 2 * k),
        ny in (4usize..9).prop_map(|k| 2 * k),
        t in -1e6f64..1e6,
        drift in -1e6f64..1e6,
        qx in -3.0f64..3.0,
        qy in -3.0f64..3.0,
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 256),
    ) {
        let grid = Grid2D::new(nx, ny, 2.5, 7.0).unwrap();
        let state = SimState {
            t,
            phi: ScalarField::new(grid, values[..nx * ny].to_vec()).unwrap(),
            drift,
            q: (qx, qy),
            z: None,
        };
        let bytes = checkpoint_bytes(&state);
        prop_assert_eq!(checkpoint_bytes(&parse_checkpoint(&bytes).unwrap()), bytes);
    }

    #[test]
    fn csv_floats_round_trip(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20)) {
        let mut t = CsvTable::new(&["a", "b", "c"]);
        for r in &rows {
            t.push_f64(r).unwrap();
        }
        let back = CsvTable::parse(&t.to_text()).unwrap();
        for (k, name) in ["a", "b", "c"].iter().enumerate() {
            let col = back.column_f64(name).unwrap();
            for (got, row) in col.iter().zip(&rows) {
                prop_assert!(got.to_bits() == row[k].to_bits() || (got.is_nan() && row[k].is_nan()));
            }
        }
    }

    #[test]
    fn wrapped_angles_stay_in_range(d in -1e4f64..1e4) {
        let w = wrap_angle(d);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let turns = (d - w) / (2.0 * std::f64::consts::PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}
