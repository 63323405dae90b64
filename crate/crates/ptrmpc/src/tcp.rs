//! Loopback socket mesh implementing [`Transport`].
//!
//! Every ordered party pair `(s, r)` gets its own connection. Per exchange,
//! each sender writes a `u32` frame count followed by the encoded frames on
//! each of its outgoing links, and every receiver reads all of its incoming
//! links. Writers run on scoped threads so large rounds cannot deadlock on
//! full socket buffers.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Ipv4Addr, TcpListener, TcpStream};
use std::thread;

use ptrmpc_core::harness::{Frame, Transport, TransportError};

struct Link {
    tx: BufWriter<TcpStream>,
    rx: BufReader<TcpStream>,
}

/// Full mesh of `n * (n - 1)` loopback connections.
pub struct TcpMesh {
    n: usize,
    /// `links[s * n + r]` carries frames from `s` to `r`.
    links: Vec<Option<Link>>,
}

impl std::fmt::Debug for TcpMesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TcpMesh")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl TcpMesh {
    /// Opens one listener per party on an ephemeral port and connects every
    /// ordered pair.
    pub fn loopback(n: usize) -> io::Result<Self> {
        let listeners = (0..n)
            .map(|_| TcpListener::bind((Ipv4Addr::LOCALHOST, 0)))
            .collect::<io::Result<Vec<_>>>()?;
        let mut links = Vec::with_capacity(n * n);
        for s in 0..n {
            for r in 0..n {
                if s == r {
                    links.push(None);
                    continue;
                }
                let out = TcpStream::connect(listeners[r].local_addr()?)?;
                let (inc, _) = listeners[r].accept()?;
                out.set_nodelay(true)?;
                inc.set_nodelay(true)?;
                links.push(Some(Link {
                    tx: BufWriter::new(out),
                    rx: BufReader::new(inc),
                }));
            }
        }
        Ok(TcpMesh { n, links })
    }
}

fn io_err(e: io::Error) -> TransportError {
    TransportError(e.to_string())
}

fn read_frame(rx: &mut impl Read) -> Result<Frame, TransportError> {
    let mut len = [0u8; 4];
    rx.read_exact(&mut len).map_err(io_err)?;
    let body = u32::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; 4 + body];
    buf[..4].copy_from_slice(&len);
    rx.read_exact(&mut buf[4..]).map_err(io_err)?;
    let (f, _) = Frame::decode(&buf)?;
    Ok(f)
}

impl Transport for TcpMesh {
    fn exchange(&mut self, frames: Vec<Frame>) -> Result<Vec<Frame>, TransportError> {
        let n = self.n;
        let mut outgoing: Vec<Vec<Frame>> = (0..n * n).map(|_| Vec::new()).collect();
        for f in frames {
            let (s, r) = (f.sender as usize, f.receiver as usize);
            if s >= n || r >= n || s == r {
                return Err(TransportError(format!("no link from {s} to {r}")));
            }
            outgoing[s * n + r].push(f);
        }
        let mut received: Vec<Frame> = Vec::new();
        let links = &mut self.links;
        thread::scope(|scope| -> Result<(), TransportError> {
            let mut writers = Vec::new();
            let mut rxs = Vec::new();
            for (slot, batch) in links.iter_mut().zip(&outgoing) {
                let Some(link) = slot else { continue };
                let tx = &mut link.tx;
                rxs.push(&mut link.rx);
                writers.push(scope.spawn(move || -> Result<(), TransportError> {
                    let mut buf = (batch.len() as u32).to_le_bytes().to_vec();
                    for f in batch {
                        f.encode_into(&mut buf)?;
                    }
                    tx.write_all(&buf).map_err(io_err)?;
                    tx.flush().map_err(io_err)
                }));
            }
            for rx in rxs {
                let mut cnt = [0u8; 4];
                rx.read_exact(&mut cnt).map_err(io_err)?;
                for _ in 0..u32::from_le_bytes(cnt) {
                    received.push(read_frame(rx)?);
                }
            }
            for w in writers {
                w.join()
                    .map_err(|_| TransportError("writer thread panicked".into()))??;
            }
            Ok(())
        })?;
        received.sort_by_key(|f| (f.receiver, f.sender));
        Ok(received)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_arrive_sorted_by_receiver() {
        let mut mesh = TcpMesh::loopback(3).unwrap();
        let mut frames = Vec::new();
        for s in 0..3u16 {
            for r in 0..3u16 {
                if s != r {
                    frames.push(Frame {
                        round: 1,
                        op_id: 7,
                        sender: s,
                        receiver: r,
                        payload: vec![s as u8, r as u8],
                    });
                }
            }
        }
        let got = mesh.exchange(frames.clone()).unwrap();
        frames.sort_by_key(|f| (f.receiver, f.sender));
        assert_eq!(got, frames);
        // empty rounds still synchronize
        assert!(mesh.exchange(Vec::new()).unwrap().is_empty());
    }

    #[test]
    fn large_round_does_not_block() {
        let mut mesh = TcpMesh::loopback(3).unwrap();
        let frames: Vec<Frame> = (0..3u16)
            .flat_map(|s| (0..3u16).filter(move |&r| r != s).map(move |r| (s, r)))
            .map(|(s, r)| Frame {
                round: 0,
                op_id: 0,
                sender: s,
                receiver: r,
                payload: vec![0xAB; 1 << 20],
            })
            .collect();
        assert_eq!(mesh.exchange(frames).unwrap().len(), 6);
    }

    #[test]
    fn rejects_self_link() {
        let mut mesh = TcpMesh::loopback(2).unwrap();
        let f = Frame {
            round: 0,
            op_id: 0,
            sender: 1,
            receiver: 1,
            payload: vec![],
        };
        assert!(mesh.exchange(vec![f]).is_err());
    }
}
