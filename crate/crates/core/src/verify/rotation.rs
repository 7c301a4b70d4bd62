//! Anonymity check: a run on a ring shifted by `d`, driven by the same
//! scheduler choices (shifted) and the same measurement outcomes, must
//! produce the original trace with every index shifted by `d`.

use super::VerifyError;
use crate::protocols::ProtocolConfig;
use crate::qstate::Replay;
use crate::runtime::{rotate_entity, Event, ExecutionTrace, Scheduler, Source};

fn rotated_config(cfg: &ProtocolConfig, d: usize) -> ProtocolConfig {
    let n = cfg.n;
    let mut c = cfg.clone();
    c.hunger = cfg.hunger.rotated(d, n);
    c.leader = cfg.leader.map(|l| (l + d) % n);
    c.eligible = cfg.eligible.as_ref().map(|e| {
        let mut r = vec![false; n];
        for (j, v) in e.iter().enumerate() {
            r[(j + d) % n] = *v;
        }
        r
    });
    c.policy.target = (cfg.policy.target + d) % n;
    c
}

/// Hunger events applied at the same step may be recorded in a different
/// order; compare them as sets.
fn normalized(events: &[Event]) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::with_capacity(events.len());
    let mut env: Vec<Event> = Vec::new();
    for e in events {
        if e.is_env() {
            env.push(e.clone());
            continue;
        }
        env.sort_by_key(|x| (x.step, x.actor));
        out.append(&mut env);
        out.push(e.clone());
    }
    env.sort_by_key(|x| (x.step, x.actor));
    out.append(&mut env);
    out
}

/// Runs `cfg` (with its own scheduler, and `outcomes` replayed if given)
/// and the same run rotated by `d`. True iff the traces agree.
pub fn rotation_check(
    cfg: &ProtocolConfig,
    d: usize,
    outcomes: Option<Vec<u8>>,
) -> Result<bool, VerifyError> {
    let n = cfg.n;
    let src = match &outcomes {
        Some(o) => Source::Replay(Replay::new(o.clone())),
        None => Source::seeded(cfg.seed),
    };
    let base = cfg
        .build_with(Scheduler::new(&cfg.policy, n), src)?
        .with_trace(true)
        .run(cfg.budget);
    let bits = base.measurement_bits();
    let choices: Vec<usize> = base.choices.iter().map(|e| rotate_entity(*e, d, n)).collect();
    let rot_cfg = rotated_config(cfg, d % n.max(1));
    let rotated = rot_cfg
        .build_with(Scheduler::replay(choices, n), Source::Replay(Replay::new(bits)))?
        .with_trace(true)
        .run(cfg.budget);
    if rotated.outcome.name() != base.outcome.name() {
        return Ok(false);
    }
    let (Some(a), Some(b)) = (&base.trace, &rotated.trace) else {
        return Ok(false);
    };
    let expected: Vec<Event> = a.events.iter().map(|e| e.rotated(d, n)).collect();
    Ok(normalized(&expected) == normalized(&b.events))
}

/// `trace` with every index shifted by `d`.
pub fn rotate_trace(trace: &ExecutionTrace, d: usize) -> ExecutionTrace {
    ExecutionTrace {
        n: trace.n,
        events: trace.events.iter().map(|e| e.rotated(d, trace.n)).collect(),
    }
}
