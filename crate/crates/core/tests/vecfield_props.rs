use chatter_core::random;
use chatter_core::vecfield::PolyVectorField;
use proptest::prelude::*;

fn fields(seed: u64) -> (Vec<PolyVectorField>, Vec<f64>) {
    let mut r = random::rng(seed);
    let sys = random::polynomial_system(3, 1, 2, &mut r).unwrap();
    let q = random::state(3, &mut r).q;
    (sys.fields().to_vec(), q)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>()) {
        let (f, q) = fields(seed);
        let fg = f[0].lie_bracket(&f[1]).unwrap().evaluate(&q).unwrap();
        let gf = f[1].lie_bracket(&f[0]).unwrap().evaluate(&q).unwrap();
        let neg: Vec<f64> = gf.iter().map(|x| -x).collect();
        prop_assert!(close(&fg, &neg, 1e-12));
    }

    #[test]
    fn jacobi_identity(seed in any::<u64>()) {
        let (f, q) = fields(seed);
        let term = |a: &PolyVectorField, b: &PolyVectorField, c: &PolyVectorField| {
            a.lie_bracket(&b.lie_bracket(c).unwrap()).unwrap()
        };
        let sum = term(&f[0], &f[1], &f[2])
            .add(&term(&f[1], &f[2], &f[0])).unwrap()
            .add(&term(&f[2], &f[0], &f[1])).unwrap();
        prop_assert!(sum.evaluate(&q).unwrap().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn jacobian_matches_central_differences(seed in any::<u64>()) {
        let (f, q) = fields(seed);
        let j = f[1].jacobian(&q).unwrap();
        let h = 1e-6;
        for c in 0..3 {
            let mut up = q.clone();
            let mut down = q.clone();
            up[c] += h;
            down[c] -= h;
            let fu = f[1].evaluate(&up).unwrap();
            let fd = f[1].evaluate(&down).unwrap();
            for r in 0..3 {
                prop_assert!((j[(r, c)] - (fu[r] - fd[r]) / (2.0 * h)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn compiled_matches_symbolic(seed in any::<u64>()) {
        let (f, q) = fields(seed);
        let b = f[0].lie_bracket(&f[2]).unwrap();
        prop_assert!(close(&b.compile().eval(&q), &b.evaluate(&q).unwrap(), 1e-14));
    }
}
