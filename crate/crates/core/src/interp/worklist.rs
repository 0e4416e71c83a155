//! Worklists with bulk-synchronous epochs.
//!
//! Every item carries the epoch (launch number) it was pushed in. A pop during
//! epoch `e` may only see items stamped before `e`; anything else counts as an
//! epoch violation. The pipe keeps pushes and pops on different lists, so the
//! counter stays at zero unless that invariant is broken.

#[derive(Debug, Clone, Default)]
pub(crate) struct Worklist {
    items: Vec<(i64, u64)>,
    capacity: Option<usize>,
}

impl Worklist {
    pub fn with_capacity(capacity: Option<usize>) -> Self {
        Worklist { items: Vec::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn push(&mut self, item: i64, epoch: u64) -> Result<(), String> {
        if self.capacity.is_some_and(|c| self.items.len() >= c) {
            return Err(format!("worklist overflow: capacity {} exceeded", self.capacity.unwrap_or(0)));
        }
        self.items.push((item, epoch));
        Ok(())
    }

    /// Item at `index` and whether it was visible in `epoch`.
    pub fn pop(&self, index: i64, epoch: u64) -> Result<(i64, bool), String> {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.items.get(i))
            .map(|&(v, stamp)| (v, stamp < epoch))
            .ok_or_else(|| format!("wl.pop({index}) out of bounds for worklist of size {}", self.items.len()))
    }

    #[cfg(test)]
    pub fn items(&self) -> Vec<i64> {
        self.items.iter().map(|&(v, _)| v).collect()
    }
}

/// The three worklists of a pipe context.
#[derive(Debug, Clone, Default)]
pub(crate) struct PipeState {
    pub input: Worklist,
    pub output: Worklist,
    pub retry: Worklist,
}

impl PipeState {
    pub fn new(capacity: Option<usize>) -> Self {
        PipeState {
            input: Worklist::with_capacity(capacity),
            output: Worklist::with_capacity(capacity),
            retry: Worklist::with_capacity(capacity),
        }
    }

    /// After an invocation: the output becomes the next input.
    pub fn swap_in_out(&mut self) {
        std::mem::swap(&mut self.input, &mut self.output);
        self.output.clear();
    }

    /// Before a rerun: retried items become the input; the output is kept.
    pub fn swap_in_retry(&mut self) {
        std::mem::swap(&mut self.input, &mut self.retry);
        self.retry.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pushes_of_the_current_epoch_are_invisible() {
        let mut w = Worklist::default();
        w.push(7, 1).unwrap();
        w.push(8, 2).unwrap();
        assert_eq!(w.pop(0, 2).unwrap(), (7, true));
        assert_eq!(w.pop(1, 2).unwrap(), (8, false));
        assert!(w.pop(2, 2).is_err());
    }

    #[test]
    fn swaps_follow_the_pipe_protocol() {
        let mut p = PipeState::new(None);
        p.input.push(1, 0).unwrap();
        p.output.push(2, 0).unwrap();
        p.retry.push(3, 0).unwrap();
        p.swap_in_retry();
        assert_eq!((p.input.items(), p.output.items(), p.retry.items()), (vec![3], vec![2], vec![]));
        p.swap_in_out();
        assert_eq!((p.input.items(), p.output.items()), (vec![2], vec![]));
    }

    #[test]
    fn capacity_is_enforced() {
        let mut w = Worklist::with_capacity(Some(1));
        w.push(1, 0).unwrap();
        assert!(w.push(2, 0).is_err());
    }
}
