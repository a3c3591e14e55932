use eve_core::spectral::{entropy_of, DEFAULT_TOL};
use eve_core::{build_gridworld, GridSpec, Policy};
use eve_oracle::{max_entropy_occupancy, policy_distribution};

#[test]
fn cliffworld_optimum_is_consistent() {
    let mdp = build_gridworld(&GridSpec::cliffworld()).unwrap();
    let sol = max_entropy_occupancy(&mdp, 1e-12).unwrap();
    assert!(sol.entropy_star <= (mdp.n_pairs() as f64).ln());
    assert!(sol.constraint_violation < 1e-12);

    // The optimum is the stationary distribution of the policy it induces.
    let d = policy_distribution(&mdp, &sol.policy(mdp.n_states(), 4).unwrap()).unwrap();
    let gap: f64 = d
        .iter()
        .zip(sol.d_star.probs())
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(gap < 1e-9, "{gap}");
    assert!((entropy_of(&d) - sol.entropy_star).abs() < 1e-9);

    // And it beats the uniform policy.
    let uniform = policy_distribution(&mdp, &Policy::uniform(mdp.n_states(), 4)).unwrap();
    assert!(sol.entropy_star > entropy_of(&uniform) + DEFAULT_TOL);
}
