use proptest::prelude::*;
use shockhopf::spaces::{norm, Grid1D, GridFunction, NormKind};

fn grid() -> Grid1D {
    Grid1D::new(8.0, 33).unwrap()
}

fn vals() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5.0f64..5.0, 33)
}

fn gf(v: Vec<f64>) -> GridFunction {
    GridFunction::new(grid(), 1, v).unwrap()
}

const KINDS: [NormKind; 4] = [NormKind::B1, NormKind::X1, NormKind::B2Pair, NormKind::X2Pair];

proptest! {
    #[test]
    fn norms_are_absolutely_homogeneous(f in vals(), a in vals(), s in -10.0f64..10.0) {
        let (f, a) = (gf(f), gf(a));
        for kind in KINDS {
            let n1 = norm(&f.scaled(s), kind, Some(&a.scaled(s))).unwrap();
            let n0 = norm(&f, kind, Some(&a)).unwrap();
            prop_assert!((n1 - s.abs() * n0).abs() <= 1e-12 * (1.0 + n1.abs()));
        }
    }

    #[test]
    fn norms_satisfy_triangle_inequality(f in vals(), g in vals(), a in vals(), b in vals()) {
        let (f, g, a, b) = (gf(f), gf(g), gf(a), gf(b));
        let mut fg = f.clone();
        fg.axpy(1.0, &g).unwrap();
        let mut ab = a.clone();
        ab.axpy(1.0, &b).unwrap();
        for kind in KINDS {
            let lhs = norm(&fg, kind, Some(&ab)).unwrap();
            let rhs = norm(&f, kind, Some(&a)).unwrap() + norm(&g, kind, Some(&b)).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }
    }
}
