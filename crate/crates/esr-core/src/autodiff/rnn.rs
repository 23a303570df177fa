//! Recurrent and attention layers composed from tape primitives, so their
//! gradients come from the verified kernels in `ops`.

use crate::error::{Error, Result};

use super::{Tape, Tensor, Var};

/// Tape handles for one GRU direction's parameters: gate weight matrices
/// `W_* (H, F)`, recurrent matrices `U_* (H, H)`, and one bias per gate.
#[derive(Clone, Copy, Debug)]
pub struct GruCellVars {
    pub w_update: Var,
    pub u_update: Var,
    pub b_update: Var,
    pub w_reset: Var,
    pub u_reset: Var,
    pub b_reset: Var,
    pub w_cand: Var,
    pub u_cand: Var,
    pub b_cand: Var,
}

/// One GRU step:
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)        update gate
/// r = sigmoid(W_r x + U_r h + b_r)        reset gate
/// h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)    candidate
/// h' = (1 - z) ⊙ h + z ⊙ h~               convex combination
/// ```
pub fn gru_cell(tape: &mut Tape, x_t: Var, h_prev: Var, p: &GruCellVars) -> Result<Var> {
    let gate = |tape: &mut Tape, w: Var, u: Var, b: Var, h_in: Var| -> Result<Var> {
        let wx = tape.matvec(w, x_t)?;
        let uh = tape.matvec(u, h_in)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, p.w_update, p.u_update, p.b_update, h_prev)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_reset, p.u_reset, p.b_reset, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let cand_pre = gate(tape, p.w_cand, p.u_cand, p.b_cand, rh)?;
    let cand = tape.tanh(cand_pre);
    let keep = tape.affine(z, -1.0, 1.0);
    let kept = tape.mul(keep, h_prev)?;
    let new = tape.mul(z, cand)?;
    tape.add(kept, new)
}

/// Runs one GRU pass forward and one over the reversed sequence and
/// concatenates the per-step hidden states: `(F, T) -> (2H, T)`. Initial
/// hidden states are zero.
pub fn bidirectional_gru(
    tape: &mut Tape,
    seq: Var,
    forward: &GruCellVars,
    backward: &GruCellVars,
) -> Result<Var> {
    let shape = tape.value(seq).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::Shape(format!(
            "bidirectional_gru expects (F, T), got {shape:?}"
        )));
    }
    let t_steps = shape[1];
    let hidden = tape.value(forward.b_update).len();

    let run = |tape: &mut Tape, params: &GruCellVars, reversed: bool| -> Result<Vec<Var>> {
        let mut h = tape.constant(Tensor::zeros(&[hidden]));
        let mut states = vec![h; t_steps];
        let order: Vec<usize> = if reversed {
            (0..t_steps).rev().collect()
        } else {
            (0..t_steps).collect()
        };
        for t in order {
            let x_t = tape.slice_col(seq, t)?;
            h = gru_cell(tape, x_t, h, params)?;
            states[t] = h;
        }
        Ok(states)
    };

    let fwd_states = run(tape, forward, false)?;
    let bwd_states = run(tape, backward, true)?;
    let fwd = tape.stack_cols(&fwd_states)?;
    let bwd = tape.stack_cols(&bwd_states)?;
    tape.concat_rows(fwd, bwd)
}

/// Attention pooling over a step sequence `hseq: (D, T)`: per-step scores
/// `u · tanh(W h_t + b)`, softmax over steps, then the weighted sum of the
/// columns (`hseq` times the weight vector).
pub fn attention_pool(tape: &mut Tape, hseq: Var, w: Var, b: Var, u: Var) -> Result<Var> {
    let shape = tape.value(hseq).shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::Shape(format!("attention_pool expects (D, T), got {shape:?}")));
    }
    let t_steps = shape[1];
    let mut scores = Vec::with_capacity(t_steps);
    for t in 0..t_steps {
        let h_t = tape.slice_col(hseq, t)?;
        let proj = tape.dense(h_t, w, b)?;
        let act = tape.tanh(proj);
        scores.push(tape.dot(u, act)?);
    }
    let stacked = tape.stack_cols(&scores)?; // (1, T)
    let logits = tape.reshape(stacked, &[t_steps])?;
    let weights = tape.softmax(logits)?;
    tape.matvec(hseq, weights)
}
