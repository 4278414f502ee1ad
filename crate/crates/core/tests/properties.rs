use hubbard_core::fock::{build_ladder, FockCutoff};
use hubbard_core::lattice::Lattice;
use hubbard_core::manybody::{
    build_hamiltonian, evolve_exact, expectation, product_state, propagate, KrylovSettings, ManyBodyState,
    ModelParams, Observable,
};
use hubbard_core::meanfield::{
    evolve_mf, mf_energy, mf_generator, order_parameter, pad_to_cutoff, uniform_grid, IntegratorSettings,
};
use hubbard_core::random::{ginibre_density, random_gutzwiller, random_unit_vector, seeded};
use hubbard_core::reduced::{
    energy_per_site, q_moment, reduce_one_site, reduce_two_site, trace_norm_distance, Projectors,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..3.0f64).prop_map(|(j, mu, u)| ModelParams::new(j, mu, u))
}

fn small_system() -> impl Strategy<Value = (Lattice, FockCutoff)> {
    prop_oneof![
        (1usize..=4).prop_map(|m| (Lattice::new(2, 1).unwrap(), FockCutoff::new(m))),
        (1usize..=3).prop_map(|m| (Lattice::new(3, 1).unwrap(), FockCutoff::new(m))),
        (1usize..=2).prop_map(|m| (Lattice::new(2, 2).unwrap(), FockCutoff::new(m))),
    ]
}

fn random_state(lat: &Lattice, cut: FockCutoff, seed: u64) -> ManyBodyState {
    let dim = cut.dim().pow(lat.num_sites() as u32);
    ManyBodyState::new(random_unit_vector(dim, &mut seeded(seed)), cut, lat.num_sites()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lattice_bond_counts(l in 2usize..=4, d in 1usize..=3) {
        let lat = Lattice::new(l, d).unwrap();
        prop_assert_eq!(lat.bonds().len(), d * lat.num_sites());
        let mut touch = vec![0usize; lat.num_sites()];
        for b in lat.bonds() {
            touch[b.source] += 1;
            touch[b.target] += 1;
        }
        prop_assert!(touch.iter().all(|&t| t == 2 * d));
    }

    #[test]
    fn hamiltonian_symmetric_and_number_conserving((lat, cut) in small_system(), p in params()) {
        let h = build_hamiltonian(p, &lat, cut).unwrap();
        let dense = h.to_dense();
        prop_assert_eq!(&dense, &dense.transpose());
        let radix = cut.dim();
        let total = |i: usize| (0..lat.num_sites()).map(|x| (i / radix.pow(x as u32)) % radix).sum::<usize>();
        for r in 0..h.dim() {
            for (c, _) in h.row(r) {
                prop_assert_eq!(total(r), total(c));
            }
        }
    }

    #[test]
    fn krylov_preserves_norm_and_energy((lat, cut) in small_system(), p in params(), seed in any::<u64>(), t in -2.0..2.0f64) {
        let h = build_hamiltonian(p, &lat, cut).unwrap();
        let psi = random_state(&lat, cut, seed);
        let out = propagate(&h, &psi, t, &KrylovSettings::new(1e-12)).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        let e0 = expectation(&psi, Observable::Hamiltonian(&h)).unwrap().re;
        let e1 = expectation(&out, Observable::Hamiltonian(&h)).unwrap().re;
        prop_assert!((e0 - e1).abs() < 1e-9 * (1.0 + e0.abs()));
        let back = propagate(&h, &out, -t, &KrylovSettings::new(1e-12)).unwrap();
        prop_assert!(back.distance(&psi) < 1e-9);
    }

    #[test]
    fn reduced_density_invariants((lat, cut) in small_system(), seed in any::<u64>()) {
        let psi = random_state(&lat, cut, seed);
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let g2 = reduce_two_site(&psi, &lat).unwrap();
        prop_assert!((g1.trace() - 1.0).abs() < 1e-10);
        prop_assert!((g2.trace() - 1.0).abs() < 1e-10);
        prop_assert!(g1.hermitian_defect() < 1e-12);
        prop_assert!(g2.hermitian_defect() < 1e-12);
        prop_assert!(g1.eigenvalues().unwrap().iter().all(|e| *e >= -1e-10));
        prop_assert!(g2.eigenvalues().unwrap().iter().all(|e| *e >= -1e-10));
        prop_assert!((g2.swapped() - g2.matrix()).norm() < 1e-10);
        prop_assert!((g2.trace_first() - g1.matrix()).norm() < 1e-10);
        prop_assert!((g2.trace_second() - g1.matrix()).norm() < 1e-10);
    }

    #[test]
    fn energy_identity_on_random_states((lat, cut) in small_system(), p in params(), seed in any::<u64>()) {
        let h = build_hamiltonian(p, &lat, cut).unwrap();
        let psi = random_state(&lat, cut, seed);
        let direct = expectation(&psi, Observable::Hamiltonian(&h)).unwrap().re / lat.num_sites() as f64;
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let g2 = reduce_two_site(&psi, &lat).unwrap();
        prop_assert!((energy_per_site(&g1, &g2, &p).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn trace_norm_sandwich(m in prop::sample::select(vec![1usize, 2, 4, 8]), seed in any::<u64>()) {
        let cut = FockCutoff::new(m);
        let mut rng = seeded(seed);
        let gamma = ginibre_density(cut, &mut rng).unwrap();
        let proj = Projectors::new(&random_unit_vector(cut.dim(), &mut rng), cut).unwrap();
        let q = q_moment(&gamma, &proj, 0);
        let tn = trace_norm_distance(&gamma, &proj).unwrap();
        prop_assert!(2.0 * q <= tn + 1e-10);
        prop_assert!(tn <= 2.0 * 2f64.sqrt() * q.sqrt() + 1e-10);
    }

    #[test]
    fn iterated_cauchy_schwarz(m in 1usize..=8, k in 1u32..=2, seed in any::<u64>()) {
        let cut = FockCutoff::new(m);
        let mut rng = seeded(seed);
        let gamma = ginibre_density(cut, &mut rng).unwrap();
        let phi = random_unit_vector(cut.dim(), &mut rng);
        let proj = Projectors::new(&phi, cut).unwrap();
        let pn: f64 = phi.iter().enumerate().map(|(n, z)| (n as f64).powi(k as i32) * z.norm_sqr()).sum();
        let rhs = 2.0 * gamma.number_moment(k as f64) + 2.0 * pn;
        prop_assert!(q_moment(&gamma, &proj, k) <= rhs + 1e-10);
        prop_assert!(q_moment(&gamma, &proj, k) >= -1e-12);
    }

    #[test]
    fn mean_field_gauge_invariance(m in 1usize..=6, p in params(), seed in any::<u64>(), theta in 0.0..6.3f64) {
        let cut = FockCutoff::new(m);
        let phi = random_gutzwiller(cut, &mut seeded(seed));
        let rotated: Vec<Complex64> = phi.iter().map(|z| z * Complex64::from_polar(1.0, theta)).collect();
        prop_assert!((order_parameter(&phi) - order_parameter(&rotated)).norm() < 1e-14);
        prop_assert!((mf_energy(&phi, &p) - mf_energy(&rotated, &p)).abs() < 1e-13);
        let a = mf_generator(&phi, &p, cut).unwrap();
        let b = mf_generator(&rotated, &p, cut).unwrap();
        prop_assert!((a.matrix() - b.matrix()).norm() < 1e-13);
        prop_assert!(a.is_hermitian(1e-14));
    }

    #[test]
    fn mean_field_conservation(m in 2usize..=10, p in params(), seed in any::<u64>()) {
        let cut = FockCutoff::new(m);
        let phi0 = random_gutzwiller(cut, &mut seeded(seed));
        let traj = evolve_mf(&phi0, &p, cut, &uniform_grid(0.5, 6), IntegratorSettings { dt: 1e-3, richardson: false }).unwrap();
        let (n0, e0) = (traj.states[0].number(), mf_energy(&phi0, &p));
        for s in &traj.states {
            prop_assert!((s.norm() - 1.0).abs() < 1e-9);
            prop_assert!((s.number() - n0).abs() < 1e-8);
            prop_assert!((mf_energy(&s.phi, &p) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn product_states_stay_normalized((lat, cut) in small_system(), seed in any::<u64>()) {
        let phi = random_gutzwiller(cut, &mut seeded(seed));
        let psi = product_state(&phi, &lat).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
        let g1 = reduce_one_site(&psi, &lat).unwrap();
        let proj = Projectors::new(&phi, cut).unwrap();
        prop_assert!((g1.matrix() - &proj.p).norm() < 1e-12);
    }
}

#[test]
fn commutator_is_identity_below_cutoff() {
    for m in [1, 2, 4, 8, 16] {
        let l = build_ladder(FockCutoff::new(m));
        let (a, ad) = (l.annihilator.matrix(), l.creation.matrix());
        let comm = a * ad - ad * a;
        for n in 0..m {
            assert!((comm[(n, n)] - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        assert!((comm[(m, m)] + Complex64::new(m as f64, 0.0)).norm() < 1e-13);
        assert_eq!(*ad, a.adjoint());
    }
}

#[test]
fn product_ansatz_is_exact_without_hopping() {
    let lat = Lattice::new(2, 2).unwrap();
    let cut = FockCutoff::new(3);
    let p = ModelParams::new(0.0, 0.4, 1.3);
    let phi0 = pad_to_cutoff(&random_gutzwiller(FockCutoff::new(2), &mut seeded(5)), cut).unwrap();
    let h = build_hamiltonian(p, &lat, cut).unwrap();
    let grid = uniform_grid(1.0, 5);
    let exact = evolve_exact(&h, &product_state(&phi0, &lat).unwrap(), &grid, 1e-12).unwrap();
    let mf = evolve_mf(&phi0, &p, cut, &grid, IntegratorSettings { dt: 1e-3, richardson: false }).unwrap();
    for (psi, s) in exact.iter().zip(&mf.states) {
        let g1 = reduce_one_site(psi, &lat).unwrap();
        let norm = s.norm();
        let phi: Vec<Complex64> = s.phi.iter().map(|z| z / norm).collect();
        let proj = Projectors::new(&phi, cut).unwrap();
        assert!(q_moment(&g1, &proj, 0).abs() < 1e-10);
    }
}
