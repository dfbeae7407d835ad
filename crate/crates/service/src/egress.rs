//! Audit of a process's TCP sockets from `/proc`, used to confirm that the
//! service talks to nothing beyond loopback.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcpSocket {
    pub local: SocketAddr,
    pub remote: SocketAddr,
    /// Kernel state code: 01 established, 02 syn-sent, 0A listen.
    pub state: u8,
}

impl TcpSocket {
    /// An outgoing or accepted connection whose peer is not this host.
    pub fn is_external(&self) -> bool {
        let ip = self.remote.ip();
        let ip = match ip {
            IpAddr::V6(v6) => v6.to_ipv4_mapped().map(IpAddr::V4).unwrap_or(ip),
            v4 => v4,
        };
        self.state != 0x0A && !ip.is_loopback() && !ip.is_unspecified()
    }
}

fn parse_addr(field: &str) -> Option<SocketAddr> {
    let (ip, port) = field.split_once(':')?;
    let port = u16::from_str_radix(port, 16).ok()?;
    let ip = match ip.len() {
        8 => IpAddr::V4(Ipv4Addr::from(u32::from_str_radix(ip, 16).ok()?.swap_bytes())),
        32 => {
            let mut bytes = [0u8; 16];
            for (i, chunk) in bytes.chunks_mut(4).enumerate() {
                let word = u32::from_str_radix(&ip[i * 8..i * 8 + 8], 16).ok()?;
                chunk.copy_from_slice(&word.to_le_bytes());
            }
            IpAddr::V6(Ipv6Addr::from(bytes))
        }
        _ => return None,
    };
    Some(SocketAddr::new(ip, port))
}

/// Parses one `/proc/<pid>/net/tcp{,6}` table into (inode, socket) pairs.
pub fn parse_tcp_table(text: &str) -> Vec<(u64, TcpSocket)> {
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split_whitespace().collect();
            let sock = TcpSocket {
                local: parse_addr(f.get(1)?)?,
                remote: parse_addr(f.get(2)?)?,
                state: u8::from_str_radix(f.get(3)?, 16).ok()?,
            };
            Some((f.get(9)?.parse().ok()?, sock))
        })
        .collect()
}

fn socket_inodes(pid: &str) -> io::Result<HashSet<u64>> {
    let mut out = HashSet::new();
    for entry in fs::read_dir(format!("/proc/{pid}/fd"))? {
        let Ok(target) = fs::read_link(entry?.path()) else { continue };
        let target = target.to_string_lossy();
        if let Some(n) = target.strip_prefix("socket:[").and_then(|s| s.strip_suffix(']')) {
            if let Ok(inode) = n.parse() {
                out.insert(inode);
            }
        }
    }
    Ok(out)
}

/// TCP sockets held by `pid` (this process when `None`).
pub fn tcp_sockets(pid: Option<u32>) -> io::Result<Vec<TcpSocket>> {
    let pid = pid.map_or_else(|| "self".to_string(), |p| p.to_string());
    let owned = socket_inodes(&pid)?;
    let mut out = Vec::new();
    for table in ["tcp", "tcp6"] {
        let text = match fs::read_to_string(format!("/proc/{pid}/net/{table}")) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
            Err(e) => return Err(e),
        };
        out.extend(
            parse_tcp_table(&text)
                .into_iter()
                .filter(|(inode, _)| owned.contains(inode))
                .map(|(_, s)| s),
        );
    }
    Ok(out)
}

/// Connections of `pid` to anything other than loopback.
pub fn external_connections(pid: Option<u32>) -> io::Result<Vec<TcpSocket>> {
    Ok(tcp_sockets(pid)?.into_iter().filter(TcpSocket::is_external).collect())
}
