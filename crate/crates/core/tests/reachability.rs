use std::sync::Arc;

use cobandit::gossip::{decide_comm, deliver, FeedbackBuffer, FeedbackMessage, Participant, SharedMessage};
use cobandit::theory::hear_probability;
use cobandit::{AreaId, DeviceId, NetworkId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N: u32 = 20;
const P_T: f64 = 0.05;
const P_L: f64 = 1.0 / 3.0;
const D: u32 = 5;

fn own(slot: u32, sender: u32) -> SharedMessage {
    Arc::new(FeedbackMessage {
        slot,
        sender: DeviceId(sender),
        network: NetworkId(1),
        bitrate_mbps: 1.0,
        client_count: 1,
        available_networks: vec![NetworkId(1)],
        distribution: vec![1.0],
    })
}

/// Per trial, the fraction of devices other than 0 that hold device 0's
/// slot-1 observation after each of slots 1..=D+1.
fn reach(trials: u32, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let mut known = vec![0.0; D as usize + 1];
        let mut buffers: Vec<FeedbackBuffer> = (0..N).map(|_| FeedbackBuffer::new(D)).collect();
        for t in 1..=D + 1 {
            let mine: Vec<SharedMessage> = (0..N).map(|i| own(t, i)).collect();
            let decisions: Vec<_> = (0..N).map(|_| decide_comm(false, P_T, P_L, &mut rng)).collect();
            let received: Vec<Vec<SharedMessage>> = {
                let parts: Vec<Participant<'_>> = (0..N as usize)
                    .map(|i| {
                        let mut outgoing = vec![&mine[i]];
                        outgoing.extend(buffers[i].iter());
                        Participant {
                            device: DeviceId(i as u32),
                            area: AreaId(0),
                            decision: decisions[i],
                            outgoing,
                        }
                    })
                    .collect();
                deliver(&parts, false)
                    .into_iter()
                    .map(|v| v.into_iter().cloned().collect())
                    .collect()
            };
            for (i, b) in buffers.iter_mut().enumerate() {
                b.absorb(Some(&mine[i]), &received[i], t);
            }
            let holders = buffers[1..].iter().filter(|b| b.contains(1, DeviceId(0))).count();
            known[(t - 1) as usize] = holders as f64 / f64::from(N - 1);
        }
        out.push(known);
    }
    out
}

#[test]
fn forwarding_reach_against_the_closed_form() {
    // Chance that a given device hears a given sender directly in one slot.
    let b0 = P_T * (1.0 - P_T) * P_L;
    let trials = 20_000;
    let per_trial = reach(trials, 99);
    for delay in 0..=D as usize {
        let xs: Vec<f64> = per_trial.iter().map(|k| k[delay]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        let direct = 1.0 - (1.0 - b0).powi(delay as i32 + 1);
        let closed = hear_probability(N, b0, delay as u32).unwrap();
        println!("delay {delay}: reach {mean:.5} +- {se:.5}, direct only {direct:.5}, closed form {closed:.5}");
        // The sender keeps re-sending its own observation, so hearing it
        // directly in any slot of the window is a lower bound.
        assert!(mean >= direct - 3.0 * se, "delay {delay}");
        if delay == 0 {
            assert!((mean - closed).abs() <= 3.0 * se);
        }
    }
}
