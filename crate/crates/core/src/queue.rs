//! FIFO request queue. The queue length is derived from request IDs: the id
//! of the last arrival minus the id of the last dequeued request.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    /// Consecutive, starting at 1.
    pub id: u64,
    pub arrival_time: f64,
    /// Seconds of processing. `None` means the demand is drawn from the
    /// configured service distribution when the request is dispatched.
    pub service_demand: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RequestQueue {
    last_arrived_id: Option<u64>,
    last_dequeued_id: Option<u64>,
    pending: VecDeque<Request>,
}

impl RequestQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(&mut self, r: Request) -> Result<()> {
        let expected = self.last_arrived_id.unwrap_or(0) + 1;
        if r.id != expected {
            return Err(Error::NonConsecutiveId {
                expected,
                got: r.id,
            });
        }
        if let Some(d) = r.service_demand {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(format!(
                    "request {} has non-positive service demand {d}",
                    r.id
                )));
            }
        }
        self.last_arrived_id = Some(r.id);
        self.pending.push_back(r);
        Ok(())
    }

    pub fn dequeue(&mut self) -> Option<Request> {
        let r = self.pending.pop_front()?;
        self.last_dequeued_id = Some(r.id);
        Some(r)
    }

    /// `W(t)`.
    pub fn len(&self) -> u64 {
        self.last_arrived_id.unwrap_or(0) - self.last_dequeued_id.unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_arrived_id(&self) -> Option<u64> {
        self.last_arrived_id
    }

    pub fn last_dequeued_id(&self) -> Option<u64> {
        self.last_dequeued_id
    }

    pub fn pending(&self) -> impl Iterator<Item = &Request> {
        self.pending.iter()
    }

    pub fn peek(&self) -> Option<&Request> {
        self.pending.front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(id: u64) -> Request {
        Request {
            id,
            arrival_time: id as f64,
            service_demand: None,
        }
    }

    #[test]
    fn fresh_queue_is_empty() {
        let mut q = RequestQueue::new();
        assert_eq!(q.len(), 0);
        assert!(q.dequeue().is_none());
        assert_eq!(q.last_dequeued_id(), None);
    }

    #[test]
    fn first_enqueue() {
        let mut q = RequestQueue::new();
        q.enqueue(req(1)).unwrap();
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn id_difference() {
        let mut q = RequestQueue::new();
        for id in 1..=119 {
            q.enqueue(req(id)).unwrap();
        }
        for _ in 0..95 {
            q.dequeue().unwrap();
        }
        assert_eq!(q.len(), 24);
        q.enqueue(req(120)).unwrap();
        assert_eq!(q.len(), 25);
        assert_eq!(q.last_arrived_id(), Some(120));
        assert_eq!(q.last_dequeued_id(), Some(95));
    }

    #[test]
    fn drained_queue() {
        let mut q = RequestQueue::new();
        for id in 1..=42 {
            q.enqueue(req(id)).unwrap();
        }
        while q.dequeue().is_some() {}
        assert_eq!(q.last_dequeued_id(), Some(42));
        assert_eq!(q.len(), 0);
    }

    #[test]
    fn rejects_gap_and_rewind() {
        let mut q = RequestQueue::new();
        assert!(matches!(
            q.enqueue(req(2)),
            Err(Error::NonConsecutiveId { expected: 1, got: 2 })
        ));
        for id in 1..=9 {
            q.enqueue(req(id)).unwrap();
        }
        assert!(q.enqueue(req(7)).is_err());
        assert_eq!(q.len(), 9);
    }

    #[test]
    fn rejects_bad_demand() {
        let mut q = RequestQueue::new();
        let r = Request {
            service_demand: Some(0.0),
            ..req(1)
        };
        assert!(q.enqueue(r).is_err());
    }

    #[test]
    fn fifo_order() {
        let mut q = RequestQueue::new();
        for id in 1..=10 {
            q.enqueue(req(id)).unwrap();
        }
        let ids: Vec<u64> = std::iter::from_fn(|| q.dequeue()).map(|r| r.id).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn head_of_two() {
        let mut q = RequestQueue::new();
        for id in 1..=6 {
            q.enqueue(req(id)).unwrap();
        }
        for _ in 0..4 {
            q.dequeue();
        }
        assert_eq!(q.dequeue().unwrap().id, 5);
        assert_eq!(q.len(), 1);
    }

    proptest! {
        #[test]
        fn id_difference_matches_physical_count(ops in prop::collection::vec(any::<bool>(), 0..300)) {
            let mut q = RequestQueue::new();
            let mut next = 1;
            let mut expected_out = 1;
            for push in ops {
                if push {
                    q.enqueue(req(next)).unwrap();
                    next += 1;
                } else if let Some(r) = q.dequeue() {
                    prop_assert_eq!(r.id, expected_out);
                    expected_out += 1;
                }
                prop_assert_eq!(q.len(), q.pending().count() as u64);
                let ids: Vec<u64> = q.pending().map(|r| r.id).collect();
                prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
