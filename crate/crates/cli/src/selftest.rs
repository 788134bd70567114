//! Built-in oracle checks: fast, deterministic versions of the invariants
//! the test suite verifies, runnable from the installed binary.

use num_traits::{One, Signed, ToPrimitive};
use rand::prelude::*;

use wavesel::analysis::chi_square_cdf;
use wavesel::estimator::{estimate_range, wrap, wrapped_error, PhaseVector};
use wavesel::exact::{gcd_all, parse_rational, rational_lcm, Integer, Rational};
use wavesel::lattice::DualLattice;
use wavesel::select::{
    gamma_default, initial_upper_bound, objective_l, objective_l2, optimize, SearchConfig,
};
use wavesel::sim::{run_sweep, SimConfig};
use wavesel::{LatticeContext64, WavelengthSet};

pub fn run() -> Result<u8, String> {
    let checks: Vec<(&str, fn() -> Result<(), String>)> = vec![
        ("lcm fixtures", check_lcm_fixtures),
        ("dual determinant identity", check_determinant_identity),
        ("closest point vs box oracle", check_closest_point),
        ("chi-square closed forms", check_chi_square),
        ("phase wrapping", check_wrap),
        ("zero-noise recovery", check_zero_noise),
        ("objective consistency", check_objectives),
        ("search vs exhaustive oracle", check_search_oracle),
        ("three-wavelength optimization", check_fixture_b),
        ("plateau simulation", check_plateau),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failed == 0 {
        Ok(0)
    } else {
        Err(format!("{failed} selftest check(s) failed"))
    }
}

fn ws(tokens: &[&str]) -> WavelengthSet {
    WavelengthSet::new(tokens.iter().map(|t| parse_rational(t).unwrap()).collect()).unwrap()
}

fn expect(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn check_lcm_fixtures() -> Result<(), String> {
    let cases: [(&[&str], &str); 6] = [
        (&["2", "3", "5"], "30"),
        (&["30/13", "15/4", "5"], "30"),
        (
            &["101039/66", "1076285/682", "198036440/125389", "17572/11"],
            "198036440/11",
        ),
        (
            &[
                "1528",
                "3868970284693/2500000000",
                "156953786407767/100000000000",
                "17572/11",
            ],
            "21341177681997756307118171701464",
        ),
        (&["2", "3", "5", "7", "11"], "2310"),
        (&["22/3", "66/17", "77/18", "110/31", "11"], "2310"),
    ];
    for (tokens, want) in cases {
        let lambdas: Vec<Rational> = tokens.iter().map(|t| parse_rational(t).unwrap()).collect();
        let got = rational_lcm(&lambdas).map_err(|e| e.to_string())?;
        expect(
            got == parse_rational(want).unwrap(),
            format!("lcm({tokens:?}) = {got}, want {want}"),
        )?;
        if tokens.len() == 4 && tokens[0] == "1528" {
            // The published period for this set is stated as > 2e22.
            let lower = Rational::from_integer(Integer::from(2u8)) * big_pow10(22);
            expect(got > lower, format!("period {got} not above 2e22"))?;
        }
        // Derived vector is integral with gcd 1 for every fixture.
        let set = WavelengthSet::new(lambdas).unwrap();
        for (lambda, v) in set.lambdas().iter().zip(set.v()) {
            expect(
                (set.period() / lambda) == Rational::from_integer(v.clone()),
                "v not integral",
            )?;
            expect(v.is_positive(), "v not positive")?;
        }
        expect(
            gcd_all(set.v()).unwrap().is_one(),
            format!("gcd(v) != 1 for {tokens:?}"),
        )?;
    }
    Ok(())
}

fn big_pow10(exp: u32) -> Rational {
    Rational::from_integer(Integer::from(10u8).pow(exp))
}

fn random_set(rng: &mut impl Rng, n: usize, max: i64) -> WavelengthSet {
    let mut lambdas = vec![Rational::one()];
    for _ in 1..n {
        let p = rng.random_range(1..=max);
        let q = rng.random_range(1..=max);
        lambdas.push(Rational::new(p.into(), q.into()));
    }
    WavelengthSet::new(lambdas).unwrap()
}

fn check_determinant_identity() -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(101);
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let set = random_set(&mut rng, n, 30);
        let ctx = LatticeContext64::new(set);
        let det = ctx.dual().gram_det_exact();
        let norm = Rational::from_integer(ctx.source().v_norm_sq());
        expect(
            det * norm == Rational::one(),
            "det(B'B) * ||v||^2 != 1 exactly",
        )?;
    }
    Ok(())
}

fn check_closest_point() -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(202);
    for _ in 0..50 {
        let n = rng.random_range(2..=4);
        let v: Vec<Integer> = loop {
            let raw: Vec<Integer> = (0..n)
                .map(|_| Integer::from(rng.random_range(1i64..=10)))
                .collect();
            if gcd_all(&raw).unwrap().is_one() {
                break raw;
            }
        };
        let lat: DualLattice<f64> = DualLattice::new(v).unwrap();
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let z = lat.closest_point(&target);
        let got = lat.projected_dist_sq(&target, &z);
        let want = box_minimum(&lat, &target, 6);
        expect(
            (got - want).abs() <= 1e-9 * want.max(1e-12),
            format!("decoder {got} vs box {want}"),
        )?;
    }
    Ok(())
}

fn box_minimum(lat: &DualLattice<f64>, target: &[f64], w: i64) -> f64 {
    let n = target.len();
    let center: Vec<i64> = target.iter().map(|x| x.round() as i64).collect();
    let mut idx = vec![-w; n];
    let mut best = f64::INFINITY;
    loop {
        let z: Vec<Integer> = idx
            .iter()
            .zip(center.iter())
            .map(|(&d, &c)| Integer::from(c + d))
            .collect();
        best = best.min(lat.projected_dist_sq(target, &z));
        let mut level = 0;
        loop {
            if level == n {
                return best;
            }
            idx[level] += 1;
            if idx[level] <= w {
                break;
            }
            idx[level] = -w;
            level += 1;
        }
    }
}

fn check_chi_square() -> Result<(), String> {
    for i in 0..=100 {
        let x = 0.5 * i as f64;
        let got = chi_square_cdf(2, x).map_err(|e| e.to_string())?;
        let want = 1.0 - (-x / 2.0).exp();
        expect(
            (got - want).abs() < 1e-12,
            format!("F_2({x}) = {got}, want {want}"),
        )?;
    }
    let got = chi_square_cdf(1, 1.0f64).map_err(|e| e.to_string())?;
    expect(
        (got - 0.6826894921370859).abs() < 1e-10,
        format!("F_1(1) = {got}"),
    )
}

fn check_wrap() -> Result<(), String> {
    expect(wrap(0.5f64) == -0.5, "wrap(1/2) != -1/2")?;
    expect(wrap(0.3f64) == 0.3, "wrap(0.3) != 0.3")?;
    expect((wrap(-1.2f64) + 0.2).abs() < 1e-12, "wrap(-1.2) != -0.2")?;
    for i in -20..20 {
        let x = i as f64 * 0.37;
        let w = wrap(x);
        expect((-0.5..0.5).contains(&w), format!("wrap({x}) out of range"))?;
    }
    Ok(())
}

fn check_zero_noise() -> Result<(), String> {
    let ctx = LatticeContext64::new(ws(&["2", "3", "5"]));
    let lambdas: Vec<f64> = ctx.source().lambdas_real();
    let period = 30.0;
    for i in 0..100 {
        let r0 = period * i as f64 / 100.0;
        let raw: Vec<f64> = lambdas.iter().map(|l| r0 / l).collect();
        let est = estimate_range(&PhaseVector::wrapped(&raw), &ctx);
        let err = wrapped_error(est.r_hat, r0, period);
        expect(
            err.abs() <= 1e-9 * period,
            format!("r0 = {r0}: error {err}"),
        )?;
    }
    Ok(())
}

fn check_objectives() -> Result<(), String> {
    let l_b = objective_l(&ws(&["5", "30/13", "15/4"]), 81.0);
    expect((l_b - 540.00).abs() < 0.01, format!("L(B) = {l_b}"))?;
    let l_a = objective_l(&ws(&["5", "2", "3"]), 81.0);
    expect((l_a - 562.94).abs() < 0.01, format!("L(A) = {l_a}"))?;
    let mut rng = StdRng::seed_from_u64(303);
    let lambda_max = parse_rational("5").unwrap();
    for _ in 0..50 {
        let len = rng.random_range(1..=4);
        let mut p = Vec::new();
        let mut q = Vec::new();
        for _ in 0..len {
            let pn: u64 = rng.random_range(1..=12);
            let qn: u64 = rng.random_range(pn..=3 * pn);
            let g = num_integer::gcd(pn, qn);
            p.push(pn / g);
            q.push(qn / g);
        }
        let l2 = objective_l2(&p, &q, 81.0, 25.0);
        let mut lambdas = vec![lambda_max.clone()];
        for (&pn, &qn) in p.iter().zip(q.iter()) {
            lambdas.push(Rational::new(pn.into(), qn.into()) * &lambda_max);
        }
        let l1 = objective_l(&WavelengthSet::new(lambdas).unwrap(), 81.0);
        expect(
            (l1 - l2).abs() <= 1e-9 * l1.max(1.0),
            format!("L1 = {l1} vs L2 = {l2}"),
        )?;
    }
    Ok(())
}

fn check_search_oracle() -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(404);
    for _ in 0..3 {
        let lmin = rng.random_range(2i64..=4);
        let lmax = lmin + rng.random_range(1i64..=3);
        let factor = rng.random_range(2i64..=6);
        let cfg = SearchConfig {
            n: 2,
            r_max: Rational::from_integer((lmax * factor).into()),
            lambda_min: Rational::from_integer(lmin.into()),
            lambda_max: Rational::from_integer(lmax.into()),
            gamma: Some(rng.random_range(0.5..50.0)),
            kappa: None,
            time_limit: None,
        };
        let result = optimize(&cfg).map_err(|e| e.to_string())?;
        let (objective, p, q) = brute_force_n2(&cfg);
        expect(
            result.objective.to_bits() == objective.to_bits()
                && result.p == vec![p]
                && result.q == vec![q],
            format!(
                "search ({}, p={:?}, q={:?}) vs oracle ({objective}, p={p}, q={q})",
                result.objective, result.p, result.q
            ),
        )?;
    }
    Ok(())
}

/// Independent exhaustive minimization for two wavelengths.
fn brute_force_n2(cfg: &SearchConfig) -> (f64, u64, u64) {
    let gamma = cfg.gamma.unwrap_or_else(|| gamma_default(cfg));
    let (l0, _) = initial_upper_bound(cfg, gamma).unwrap();
    let lmin = cfg.lambda_min.to_f64().unwrap();
    let lmax = cfg.lambda_max.to_f64().unwrap();
    let lambda_max_sq = lmax * lmax;
    let b = lmin * lmin * lambda_max_sq / (lmin * lmin + lambda_max_sq);
    let p_cap = ((l0 - gamma * b) / 2.0).max(0.0).sqrt().floor() as u64;
    let target = (cfg.r_max.clone() / cfg.lambda_max.clone())
        .ceil()
        .to_integer()
        .to_u64()
        .unwrap();
    // Seed candidate: p = w, q = w + 1.
    let w_a = (cfg.r_max.clone() / cfg.lambda_max.clone()).ceil().to_integer();
    let w_b = (cfg.lambda_min.clone() / (cfg.lambda_max.clone() - cfg.lambda_min.clone()))
        .ceil()
        .to_integer();
    let w = w_a.max(w_b).max(Integer::one()).to_u64().unwrap();
    let mut best = (l0, w, w + 1);
    for p in 1..=p_cap {
        let q_hi = ((p as f64) * lmax / lmin).floor() as u64;
        for q in p..=q_hi {
            if num_integer::gcd(p, q) != 1 || p < target {
                continue;
            }
            let l2 = objective_l2(&[p], &[q], gamma, lambda_max_sq);
            if l2 < best.0 {
                best = (l2, p, q);
            }
        }
    }
    best
}

fn check_fixture_b() -> Result<(), String> {
    let cfg = SearchConfig {
        n: 3,
        r_max: parse_rational("30").unwrap(),
        lambda_min: parse_rational("2").unwrap(),
        lambda_max: parse_rational("5").unwrap(),
        gamma: None,
        kappa: None,
        time_limit: None,
    };
    let result = optimize(&cfg).map_err(|e| e.to_string())?;
    let mut got: Vec<Rational> = result.wavelengths.lambdas().to_vec();
    got.sort();
    let mut want = vec![
        parse_rational("5").unwrap(),
        parse_rational("30/13").unwrap(),
        parse_rational("15/4").unwrap(),
    ];
    want.sort();
    expect(got == want, format!("got {:?}", result.wavelengths))?;
    expect(result.complete, "search did not complete")
}

fn check_plateau() -> Result<(), String> {
    let set = ws(&["2", "3", "5"]);
    let ctx = LatticeContext64::new(set.clone());
    let cfg = SimConfig::new(set, 6.0 * std::f64::consts::PI, vec![1e-5], 20_000, 7)
        .map_err(|e| e.to_string())?;
    let rows = run_sweep(&cfg, &ctx);
    let ratio = rows[0].sample_mse / rows[0].predicted_mse;
    expect(
        (0.9..1.1).contains(&ratio),
        format!("sample/predicted = {ratio}"),
    )?;
    let se = (rows[0].correct_rate * (1.0 - rows[0].correct_rate) / rows[0].trials as f64).sqrt();
    expect(
        rows[0].correct_rate <= rows[0].p_upper + 3.0 * se + 1.0 / rows[0].trials as f64,
        "upper bound violated",
    )
}
