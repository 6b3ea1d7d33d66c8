use chatter_core::fuller::{derived, difference, fuller_order, make_cascade, strata, CascadeSet, Q};
use chatter_core::random;
use num_bigint::BigInt;

fn derived_n(s: &CascadeSet, n: usize) -> CascadeSet {
    (0..n).fold(s.clone(), |acc, _| derived(&acc))
}

fn rational(r: &mut rand_chacha::ChaCha8Rng) -> Q {
    Q::new(BigInt::from(random::index(r, 1000) as i64), BigInt::from(999))
}

#[test]
fn removing_finite_sets_lowers_order_by_at_most_one() {
    for seed in 0..100u64 {
        let mut r = random::rng(seed);
        let k = random::index(&mut r, 5);
        let xi = make_cascade(k, seed).unwrap();
        let mut pts: Vec<Q> = xi.sample_points(2).into_iter().filter(|_| random::index(&mut r, 2) == 0).collect();
        pts.extend((0..3).map(|_| rational(&mut r)));
        let order = fuller_order(&difference(&xi, &CascadeSet::points(pts)).unwrap()).unwrap();
        assert!(order >= k as i64 - 1, "seed {seed}: {order} < {k} - 1");
    }
}

#[test]
fn removing_an_order_j_set_lowers_order_by_at_most_j_plus_one() {
    for seed in 0..100u64 {
        let mut r = random::rng(seed);
        let k = 1 + random::index(&mut r, 4);
        let j = random::index(&mut r, k);
        let xi = make_cascade(k, seed).unwrap();
        let other = make_cascade(j, seed + 10_000).unwrap();
        let removed = CascadeSet::union(vec![derived_n(&xi, k - j), other]).unwrap();
        assert_eq!(fuller_order(&removed).unwrap(), j as i64);
        let order = fuller_order(&difference(&xi, &removed).unwrap()).unwrap();
        assert!(order >= k as i64 - j as i64 - 1, "seed {seed}: {order}");
    }
}

#[test]
fn unions_respect_the_product_bound() {
    for seed in 0..100u64 {
        let mut r = random::rng(seed);
        let k = 1 + random::index(&mut r, 3);
        let j = random::index(&mut r, 4);
        let members: Vec<CascadeSet> =
            (0..k).map(|i| make_cascade(random::index(&mut r, j + 1), seed * 7 + i as u64).unwrap()).collect();
        let order = fuller_order(&CascadeSet::union(members).unwrap()).unwrap();
        assert!(order <= (k * (j + 1)) as i64);
    }
}

#[test]
fn strata_are_disjoint_exhaustive_and_isolated() {
    for seed in 0..30u64 {
        let s = make_cascade(3, seed).unwrap();
        let st = strata(&s).unwrap();
        for x in s.sample_points(2) {
            assert_eq!(st.iter().filter(|t| t.contains(&x)).count(), 1);
        }
        let mut r = random::rng(seed);
        for _ in 0..20 {
            let x = rational(&mut r);
            assert_eq!(st.iter().filter(|t| t.contains(&x)).count(), usize::from(s.contains(&x)));
        }
        for t in &st {
            assert_eq!(fuller_order(&derived(t)).unwrap(), -1);
        }
    }
}
