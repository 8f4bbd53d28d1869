use super::{Grant, SchedError};

/// Contiguous PRB range on a cyclic carrier; it may wrap past the last PRB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrbSpan {
    pub ue_id: usize,
    pub start: u32,
    pub len: u32,
}

impl PrbSpan {
    /// PRB indices covered, in order.
    pub fn prbs(&self, total: u32) -> impl Iterator<Item = u32> + '_ {
        let start = self.start;
        (0..self.len).map(move |i| (start + i) % total)
    }
}

/// Places grants back to back starting at `cursor`, wrapping modulo
/// `total_prbs`, and leaves `cursor` after the last placed PRB so the next
/// slot continues round robin.
pub fn allocate_prbs(
    grants: &[Grant],
    total_prbs: u32,
    cursor: &mut u32,
) -> Result<Vec<PrbSpan>, SchedError> {
    let requested: u64 = grants.iter().map(|g| g.num_prbs as u64).sum();
    if requested > total_prbs as u64 {
        return Err(SchedError::OverSubscribed {
            requested,
            total: total_prbs,
        });
    }
    let mut at = *cursor % total_prbs.max(1);
    let mut out = Vec::with_capacity(grants.len());
    for g in grants.iter().filter(|g| g.num_prbs > 0) {
        out.push(PrbSpan {
            ue_id: g.ue_id,
            start: at,
            len: g.num_prbs,
        });
        at = (at + g.num_prbs) % total_prbs;
    }
    *cursor = at;
    Ok(out)
}
