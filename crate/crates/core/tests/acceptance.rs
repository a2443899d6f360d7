//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every tolerance is a constant in this file.

use std::collections::BTreeMap;
use std::time::Instant;

use crashmod::campaign::{
    run_campaign, run_sessions, squarefree_count, squarefree_density, success_curve, wilson_interval,
    CampaignConfig,
};
use crashmod::factor::FactorBudget;
use crashmod::protocols::{
    ramon_modulus, ramon_respond, ramon_verify, wipr_respond, wipr_verify, RamonParams, WiprParams,
};
use crashmod::rabin::{keygen, Scheme};
use crashmod::sqroots::{
    all_roots_mod, count_roots, roots_ramified, roots_zero, sqrt_prime_power_closed_form,
    sqrt_prime_power_lifted, PrimePower, PrimePowerFactorization,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const ORACLE_LIMIT: u32 = 10_000;
const PRIME_POWER_LIMIT: u32 = 100_000;
const E2E_TRIALS: usize = 200;
const E2E_FORCED_EVERY: usize = 10;
const E2E_MIN_FORCED: usize = 20;
const CURVE_OPS: u64 = 40_000;
const CURVE_TRIALS: usize = 400;
const CURVE_FAULTS: usize = 5;
const CURVE_SESSIONS: usize = 200;
const Z95: f64 = 1.959_963_984_540_054;
const SPOT_RATE: f64 = 0.144;
const SPOT_PERCENT: f64 = 54.0;
const DENSITY_LIMIT: u64 = 1_000_000;
const DENSITY_TOL: f64 = 0.0005;
const Q100: u64 = 61;
const MONO_BITS: u64 = 128;
const MONO_TRIALS: usize = 100;
const MONO_BUDGETS_MS: [u64; 4] = [0, 10, 100, 1000];
const C_BIN: usize = 32;
const SESSIONS: usize = 1_000;
const SESSION_BITS: u64 = 64;
const SEED: u64 = 20_240_601;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Smallest-prime-factor table, independent of the library's factoriser.
fn spf_table(limit: u32) -> Vec<u32> {
    let mut spf = vec![0u32; limit as usize + 1];
    for i in 2..=limit as usize {
        if spf[i] == 0 {
            let mut j = i;
            while j <= limit as usize {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

fn factor_pairs(mut m: u32, spf: &[u32]) -> Vec<(u64, u32)> {
    let mut out: Vec<(u64, u32)> = Vec::new();
    while m > 1 {
        let p = spf[m as usize];
        let mut e = 0;
        while m % p == 0 {
            m /= p;
            e += 1;
        }
        out.push((p as u64, e));
    }
    out
}

/// `buckets[c]` lists every x in [0, m) with x^2 = c (mod m), ascending.
fn square_buckets(m: u32) -> Vec<Vec<u32>> {
    let mut buckets = vec![Vec::new(); m as usize];
    for x in 0..m {
        buckets[((x as u64 * x as u64) % m as u64) as usize].push(x);
    }
    buckets
}

fn as_u32s(roots: &[BigUint]) -> Vec<u32> {
    let mut v: Vec<u32> = roots.iter().map(|r| r.to_u32().expect("root below modulus")).collect();
    v.sort_unstable();
    v
}

fn root_oracle() -> Outcome {
    let spf = spf_table(ORACLE_LIMIT);
    let mut pairs = 0u64;
    let mut eta_hist: BTreeMap<usize, u64> = BTreeMap::new();
    for m in (3..=ORACLE_LIMIT).step_by(2) {
        let fact = PrimePowerFactorization::from_pairs(&factor_pairs(m, &spf)).map_err(|e| e.to_string())?;
        let buckets = square_buckets(m);
        for (c, expected) in buckets.iter().enumerate() {
            let c_big = BigUint::from(c);
            let got = all_roots_mod(&c_big, &fact).map_err(|e| format!("m={m} C={c}: {e}"))?;
            check(as_u32s(got.roots()) == *expected, format!("roots differ at m={m} C={c}"))?;
            let eta = count_roots(&c_big, &fact).map_err(|e| e.to_string())?;
            check(eta == BigUint::from(expected.len()), format!("eta differs at m={m} C={c}"))?;
            *eta_hist.entry(expected.len()).or_default() += 1;
            pairs += 1;
        }
    }
    let top: Vec<String> = eta_hist.iter().take(6).map(|(k, v)| format!("{k}:{v}")).collect();
    Ok(format!("{pairs} (m, C) pairs; eta counts {}", top.join(" ")))
}

fn prime_powers(limit: u32, spf: &[u32]) -> Vec<(u32, u32, u32)> {
    let mut out = Vec::new();
    for p in 3..=limit {
        if spf[p as usize] != p {
            continue;
        }
        let (mut pe, mut e) = (p, 1);
        loop {
            out.push((p, e, pe));
            match pe.checked_mul(p) {
                Some(next) if next <= limit => {
                    pe = next;
                    e += 1;
                }
                _ => break,
            }
        }
    }
    out
}

fn degenerate_roots() -> Outcome {
    let spf = spf_table(PRIME_POWER_LIMIT);
    let (mut zero_cases, mut ramified_cases, mut nonempty) = (0u64, 0u64, 0u64);
    for (p, e, pe) in prime_powers(PRIME_POWER_LIMIT, &spf) {
        let pp = PrimePower::new(BigUint::from(p), e).map_err(|er| er.to_string())?;
        let buckets = square_buckets(pe);
        let zero = roots_zero(&pp).map_err(|er| er.to_string())?;
        check(zero.len() == p.pow(e / 2) as usize, format!("|roots_zero| wrong for {p}^{e}"))?;
        check(as_u32s(zero.roots()) == buckets[0], format!("roots_zero differs for {p}^{e}"))?;
        zero_cases += 1;
        for c in (p..pe).step_by(p as usize) {
            let mut l = 0;
            let mut t = c;
            while t % p == 0 {
                t /= p;
                l += 1;
            }
            let got = roots_ramified(&BigUint::from(c), &pp).map_err(|er| er.to_string())?;
            let expected = &buckets[c as usize];
            check(as_u32s(got.roots()) == *expected, format!("roots_ramified differs at {p}^{e}, C={c}"))?;
            if !expected.is_empty() {
                check(
                    l % 2 == 0 && got.len() == 2 * p.pow(l / 2) as usize,
                    format!("|roots_ramified| wrong at {p}^{e}, C={c}"),
                )?;
                nonempty += 1;
            }
            ramified_cases += 1;
        }
    }
    Ok(format!(
        "{zero_cases} zero cases, {ramified_cases} ramified cases ({nonempty} solvable)"
    ))
}

fn closed_form_vs_lifted() -> Outcome {
    let spf = spf_table(PRIME_POWER_LIMIT);
    let mut cases = 0u64;
    for (p, e, pe) in prime_powers(PRIME_POWER_LIMIT, &spf) {
        if p % 4 != 3 {
            continue;
        }
        let pp = PrimePower::new(BigUint::from(p), e).map_err(|er| er.to_string())?;
        let mut seen = vec![false; pe as usize];
        for x in 1..pe {
            if x % p == 0 {
                continue;
            }
            let c = ((x as u64 * x as u64) % pe as u64) as usize;
            if std::mem::replace(&mut seen[c], true) {
                continue;
            }
            let c = BigUint::from(c);
            let a = sqrt_prime_power_closed_form(&c, &pp).map_err(|er| er.to_string())?;
            let b = sqrt_prime_power_lifted(&c, &pp).map_err(|er| er.to_string())?;
            check(
                a.len() == 2 && as_u32s(a.roots()) == as_u32s(b.roots()),
                format!("mismatch at {p}^{e}, C={c}"),
            )?;
            cases += 1;
        }
    }
    Ok(format!("{cases} unit squares agree"))
}

fn end_to_end() -> Outcome {
    let mut cfg = CampaignConfig::new(Scheme::Wipr, 64, E2E_TRIALS, FactorBudget::unlimited(), SEED);
    cfg.forced_degenerate_every = Some(E2E_FORCED_EVERY);
    let report = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let o = &report.stats.outcome;
    let detail = format!(
        "{}/{} recovered, {} forced, {} degenerate",
        o.successes, o.trials, o.forced_trials, o.degenerate_trials
    );
    check(o.successes == E2E_TRIALS, detail.clone())?;
    check(o.forced_trials >= E2E_MIN_FORCED && o.degenerate_trials >= E2E_MIN_FORCED, detail.clone())?;
    Ok(detail)
}

fn success_composition() -> Outcome {
    let cfg = CampaignConfig::new(Scheme::Wipr, 64, CURVE_TRIALS, FactorBudget::ops(CURVE_OPS), SEED);
    let report = run_campaign(&cfg).map_err(|e| e.to_string())?;
    let p_hat = report.stats.outcome.success_rate;
    let sessions = run_sessions(&cfg, CURVE_SESSIONS, CURVE_FAULTS, CURVE_TRIALS as u64).map_err(|e| e.to_string())?;
    let wins = sessions.iter().filter(|&&s| s).count();
    let (lo, hi) = wilson_interval(wins, sessions.len(), Z95);
    let predicted = success_curve(p_hat, CURVE_FAULTS as u32);
    let spot = success_curve(SPOT_RATE, 5);
    let detail = format!(
        "p_hat={p_hat:.4} predicted X={CURVE_FAULTS}: {predicted:.4}, simulated {wins}/{} CI [{lo:.4}, {hi:.4}]; spot (0.144, 5) = {spot:.6}",
        sessions.len()
    );
    check(lo <= predicted && predicted <= hi, detail.clone())?;
    check((spot * 100.0).round() == SPOT_PERCENT, detail.clone())?;
    Ok(detail)
}

fn squarefree() -> Outcome {
    // independent sieve count
    let limit = DENSITY_LIMIT as usize;
    let mut sf = vec![true; limit + 1];
    let mut d = 2;
    while d * d <= limit {
        for m in (d * d..=limit).step_by(d * d) {
            sf[m] = false;
        }
        d += 1;
    }
    let sieve = sf[1..].iter().filter(|&&b| b).count() as u64;
    let q = squarefree_count(DENSITY_LIMIT);
    let density = squarefree_density(DENSITY_LIMIT).map_err(|e| e.to_string())?;
    let target = 6.0 / std::f64::consts::PI.powi(2);
    let q100 = squarefree_count(100);
    let detail = format!("Q(10^6)={q} (sieve {sieve}), density {density:.6} vs {target:.6}, Q(100)={q100}");
    check(q == sieve && (density - target).abs() <= DENSITY_TOL && q100 == Q100, detail.clone())?;
    Ok(detail)
}

fn budget_monotonicity() -> Outcome {
    let mut rates = Vec::new();
    let mut lines = Vec::new();
    for ms in MONO_BUDGETS_MS {
        let cfg = CampaignConfig::new(Scheme::Wipr, MONO_BITS, MONO_TRIALS, FactorBudget::from_millis(ms), SEED);
        let started = Instant::now();
        let report = run_campaign(&cfg).map_err(|e| e.to_string())?;
        let o = &report.stats.outcome;
        let c_mean = o.c.all.map_or(0.0, |s| s.mean);
        let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
        for &(c, n) in &o.c_histogram {
            *bins.entry(c / C_BIN * C_BIN).or_default() += n;
        }
        let hist: Vec<String> = bins.iter().map(|(c, n)| format!("{c}-{}:{n}", c + C_BIN - 1)).collect();
        eprintln!(
            "  budget {ms} ms: success {:.2}, mean c {c_mean:.1}, {:.0} s; c histogram {}",
            o.success_rate,
            started.elapsed().as_secs_f64(),
            hist.join(" ")
        );
        rates.push(o.success_rate);
        lines.push(format!("{ms}ms={:.2} (c̄ {c_mean:.1})", o.success_rate));
    }
    let detail = lines.join(", ");
    check(rates.windows(2).all(|w| w[0] <= w[1]), detail.clone())?;
    Ok(detail)
}

fn protocol_round_trips() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let wipr = WiprParams::scaled(SESSION_BITS).map_err(|e| e.to_string())?;
    let ramon = RamonParams::scaled(SESSION_BITS).map_err(|e| e.to_string())?;
    let ramon_uid = ramon.uid_capacity().unwrap_or(0);
    let r = BigUint::from(1u32) << (SESSION_BITS / 2);
    let (mut wipr_ok, mut ramon_ok, mut shape_ok) = (0, 0, 0);
    for _ in 0..SESSIONS {
        let key = keygen(SESSION_BITS, &mut rng).map_err(|e| e.to_string())?;
        let mut challenge = vec![0u8; wipr.challenge_len()];
        rng.fill(&mut challenge[..]);
        let mut uid = vec![0u8; wipr.uid_len()];
        rng.fill(&mut uid[..]);
        let ct = wipr_respond(&challenge, &uid, key.modulus(), &wipr, &mut rng).map_err(|e| e.to_string())?;
        if wipr_verify(&ct, &key, &challenge, &wipr).is_ok_and(|m| m.uid == uid) {
            wipr_ok += 1;
        }

        let key = ramon_modulus(SESSION_BITS, &mut rng).map_err(|e| e.to_string())?;
        if key.modulus() % &r == BigUint::from(1u32) {
            shape_ok += 1;
        }
        let mut challenge = vec![0u8; ramon.challenge_len];
        rng.fill(&mut challenge[..]);
        let mut uid = vec![0u8; ramon_uid];
        rng.fill(&mut uid[..]);
        let ct = ramon_respond(&challenge, &uid, key.modulus(), &ramon, &mut rng).map_err(|e| e.to_string())?;
        if ramon_verify(&ct, &key, &challenge, &ramon).is_ok_and(|m| m.uid == uid) {
            ramon_ok += 1;
        }
    }
    let detail = format!(
        "WIPR {wipr_ok}/{SESSIONS}, RAMON {ramon_ok}/{SESSIONS}, RAMON modulus shape {shape_ok}/{SESSIONS}"
    );
    check(wipr_ok == SESSIONS && ramon_ok == SESSIONS && shape_ok == SESSIONS, detail.clone())?;
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("root solver matches brute force for odd m <= 10^4", root_oracle),
        ("degenerate root counts for p^e <= 10^5", degenerate_roots),
        ("closed form agrees with Tonelli-Shanks + Hensel", closed_form_vs_lifted),
        ("end-to-end recovery, 64-bit WIPR", end_to_end),
        ("success over independent faults composes", success_composition),
        ("square-free density", squarefree),
        ("success rate non-decreasing in budget, 128-bit", budget_monotonicity),
        ("WIPR and RAMON session round trips", protocol_round_trips),
    ];
    let only: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let started = Instant::now();
        let result = run();
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id}: PASS  {name} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL  {name} [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
