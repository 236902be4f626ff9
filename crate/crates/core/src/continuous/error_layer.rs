//! Error-coding neuron pairs: non-leaky integrate-and-fire with a rigid
//! lower boundary at zero and subtractive reset.

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorLayerState {
    pub v_pos: Vec<f64>,
    pub v_neg: Vec<f64>,
}

impl ErrorLayerState {
    pub fn new(n_classes: usize) -> Self {
        Self {
            v_pos: vec![0.0; n_classes],
            v_neg: vec![0.0; n_classes],
        }
    }
}

/// Parameters of one update. `kick_mv` is the potential jump produced by
/// one prediction or label spike; `bias_mv` is subtracted every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDrive {
    pub kick_mv: f64,
    pub v_t_mv: f64,
    pub bias_mv: f64,
}

/// Advance the error pairs by one step. Spike lists are class indices.
pub fn step_error(
    state: &mut ErrorLayerState,
    pred: &[u32],
    label: &[u32],
    drive: &ErrorDrive,
    out_pos: &mut Vec<u32>,
    out_neg: &mut Vec<u32>,
) {
    out_pos.clear();
    out_neg.clear();
    let n = state.v_pos.len();
    let mut diff = [0i32; 64];
    let mut diff_vec;
    let diff: &mut [i32] = if n <= 64 {
        &mut diff[..n]
    } else {
        diff_vec = vec![0i32; n];
        &mut diff_vec
    };
    for &k in pred {
        diff[k as usize] += 1;
    }
    for &k in label {
        diff[k as usize] -= 1;
    }
    for k in 0..n {
        let d = diff[k] as f64 * drive.kick_mv;
        let vp = (state.v_pos[k] + d - drive.bias_mv).max(0.0);
        state.v_pos[k] = if vp > drive.v_t_mv {
            out_pos.push(k as u32);
            vp - drive.v_t_mv
        } else {
            vp
        };
        let vn = (state.v_neg[k] - d - drive.bias_mv).max(0.0);
        state.v_neg[k] = if vn > drive.v_t_mv {
            out_neg.push(k as u32);
            vn - drive.v_t_mv
        } else {
            vn
        };
    }
}
