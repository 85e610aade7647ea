use serde::Serialize;

use crate::scenario::{Agent, Scenario};
use crate::Point;

use super::{hungarian, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MotionErrors {
    pub made: f64,
    pub mfde: f64,
    pub matched: usize,
    /// Agents left unmatched on the larger side.
    pub surplus: usize,
}

/// Positions of an agent expressed in its own initial frame.
pub fn relative_trajectory(agent: &Agent) -> Vec<Point> {
    let origin = agent.initial().pose();
    agent.states.iter().map(|s| origin.to_local(s.position)).collect()
}

/// Hungarian-matched displacement errors. Agents are paired by initial position, then each
/// trajectory is compared in its own initial frame.
pub fn motion_errors(generated: &Scenario, reference: &Scenario) -> Result<MotionErrors, EvalError> {
    if generated.agents.is_empty() || reference.agents.is_empty() {
        return Err(EvalError::NoAgents);
    }
    let horizon = generated.horizon();
    if horizon != reference.horizon() || horizon < 2 {
        return Err(EvalError::Horizon { generated: horizon, reference: reference.horizon() });
    }
    let cost: Vec<Vec<f64>> = generated
        .agents
        .iter()
        .map(|g| reference.agents.iter().map(|r| g.initial().position.distance(r.initial().position)).collect())
        .collect();
    let assignment = hungarian(&cost);

    let mut made = 0.0;
    let mut mfde = 0.0;
    let mut matched = 0;
    for (gi, ri) in assignment.iter().enumerate() {
        let Some(ri) = *ri else { continue };
        let g = relative_trajectory(&generated.agents[gi]);
        let r = relative_trajectory(&reference.agents[ri]);
        let errors: Vec<f64> = g[1..].iter().zip(&r[1..]).map(|(a, b)| a.distance(*b)).collect();
        made += errors.iter().sum::<f64>() / errors.len() as f64;
        mfde += errors[errors.len() - 1];
        matched += 1;
    }
    let surplus = generated.agents.len().abs_diff(reference.agents.len());
    Ok(MotionErrors { made: made / matched as f64, mfde: mfde / matched as f64, matched, surplus })
}
