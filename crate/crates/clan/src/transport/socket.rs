//! TCP transport carrying the same frames as the simulation.
//!
//! Agents dial the center and handshake with `"CLAN" | version | role |
//! agent_id`; the center replies with a single accept/reject byte. After
//! that both directions exchange wire frames. The center multiplexes all
//! agent connections behind one [`Transport`] endpoint using a reader
//! thread per connection.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::thread::JoinHandle;

use crate::error::{TransportError, WireError};

use super::wire::{decode_frame, encode_frame, FRAME_OVERHEAD, MAGIC, VERSION};
use super::{Message, NodeAddr, Transport};

const ROLE_AGENT: u8 = 1;
const HANDSHAKE_ACCEPT: u8 = 0;
const HANDSHAKE_REJECT_DUPLICATE: u8 = 1;
const HANDSHAKE_REJECT_VERSION: u8 = 2;

fn read_exact(stream: &mut TcpStream, buf: &mut [u8]) -> Result<(), TransportError> {
    match stream.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Err(TransportError::ConnectionClosed)
        }
        Err(e) => Err(TransportError::Io(e)),
    }
}

/// Reads one complete frame from the stream.
pub fn read_frame(stream: &mut TcpStream) -> Result<Message, TransportError> {
    let mut head = [0u8; 18];
    read_exact(stream, &mut head)?;
    if &head[0..4] != MAGIC {
        return Err(WireError::BadMagic.into());
    }
    if head[4] != VERSION {
        return Err(WireError::BadVersion(head[4]).into());
    }
    let payload_len = u32::from_le_bytes(head[14..18].try_into().unwrap()) as usize;
    let mut frame = vec![0u8; FRAME_OVERHEAD + payload_len];
    frame[..18].copy_from_slice(&head);
    read_exact(stream, &mut frame[18..])?;
    let (msg, used) = decode_frame(&frame)?;
    debug_assert_eq!(used, frame.len());
    Ok(msg)
}

pub fn write_frame(stream: &mut TcpStream, msg: &Message) -> Result<(), TransportError> {
    stream.write_all(&encode_frame(msg))?;
    Ok(())
}

/// Center-side endpoint: owns one connection per agent and merges their
/// inbound frames into a single receive queue.
pub struct CenterHub {
    writers: HashMap<NodeAddr, TcpStream>,
    inbox: mpsc::Receiver<Result<Message, TransportError>>,
    _readers: Vec<JoinHandle<()>>,
}

impl CenterHub {
    /// Accepts connections on `listener` until every address in `expected`
    /// has completed a handshake. Duplicate or unexpected agent ids are
    /// rejected without disturbing the accepted set.
    pub fn accept(listener: &TcpListener, expected: &[NodeAddr]) -> Result<Self, TransportError> {
        let mut pending: Vec<NodeAddr> = expected.to_vec();
        let mut writers = HashMap::new();
        let (tx, inbox) = mpsc::channel();
        let mut readers = Vec::new();
        while !pending.is_empty() {
            let (mut stream, _) = listener.accept()?;
            let mut hello = [0u8; 8];
            read_exact(&mut stream, &mut hello)?;
            if &hello[0..4] != MAGIC || hello[5] != ROLE_AGENT {
                stream.write_all(&[HANDSHAKE_REJECT_VERSION])?;
                continue;
            }
            if hello[4] != VERSION {
                stream.write_all(&[HANDSHAKE_REJECT_VERSION])?;
                continue;
            }
            let agent_id = u16::from_le_bytes(hello[6..8].try_into().unwrap());
            // Unexpected or already-connected ids are turned away; the
            // accepted set is never disturbed.
            let Some(slot) = pending.iter().position(|&a| a == agent_id) else {
                stream.write_all(&[HANDSHAKE_REJECT_DUPLICATE])?;
                continue;
            };
            pending.swap_remove(slot);
            stream.write_all(&[HANDSHAKE_ACCEPT])?;
            let mut reader = stream.try_clone()?;
            writers.insert(agent_id, stream);
            let tx = tx.clone();
            readers.push(std::thread::spawn(move || loop {
                match read_frame(&mut reader) {
                    Ok(msg) => {
                        if tx.send(Ok(msg)).is_err() {
                            break;
                        }
                    }
                    Err(TransportError::ConnectionClosed) => break,
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }));
        }
        Ok(CenterHub {
            writers,
            inbox,
            _readers: readers,
        })
    }
}

impl Transport for CenterHub {
    fn send(&mut self, msg: Message) -> Result<(), TransportError> {
        let stream = self.writers.get_mut(&msg.receiver).ok_or_else(|| {
            TransportError::HandshakeRejected(format!("no connection to agent {}", msg.receiver))
        })?;
        stream.write_all(&encode_frame(&msg))?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        self.inbox
            .recv()
            .map_err(|_| TransportError::ConnectionClosed)?
    }
}

/// Agent-side endpoint: one connection to the center.
pub struct AgentSocket {
    stream: TcpStream,
}

impl AgentSocket {
    pub fn connect<A: ToSocketAddrs>(addr: A, agent_id: NodeAddr) -> Result<Self, TransportError> {
        let mut stream = TcpStream::connect(addr)?;
        let mut hello = Vec::with_capacity(8);
        hello.extend_from_slice(MAGIC);
        hello.push(VERSION);
        hello.push(ROLE_AGENT);
        hello.extend_from_slice(&agent_id.to_le_bytes());
        stream.write_all(&hello)?;
        let mut verdict = [0u8; 1];
        read_exact(&mut stream, &mut verdict)?;
        match verdict[0] {
            HANDSHAKE_ACCEPT => Ok(AgentSocket { stream }),
            HANDSHAKE_REJECT_DUPLICATE => Err(TransportError::DuplicateAgent(agent_id)),
            other => Err(TransportError::HandshakeRejected(format!(
                "center refused handshake with code {other}"
            ))),
        }
    }
}

impl Transport for AgentSocket {
    fn send(&mut self, msg: Message) -> Result<(), TransportError> {
        self.stream.write_all(&encode_frame(&msg))?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Message, TransportError> {
        read_frame(&mut self.stream)
    }
}
