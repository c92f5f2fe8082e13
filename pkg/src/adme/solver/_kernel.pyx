# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation engine.  Same contract as ``_pykernel.Engine``."""

from libc.stdlib cimport malloc, free


cdef class Engine:
    cdef int num_vars
    cdef int num_cons
    cdef int *lits
    cdef int *starts
    cdef int *lo
    cdef int *hi
    cdef int *reif
    cdef signed char *values
    cdef int *trail
    cdef int trail_len
    cdef int qhead
    cdef int *occ_start
    cdef int *occ
    cdef public long propagations
    cdef int num_nodes
    cdef int *exist_vars
    cdef int *edge_start
    cdef int *edge_var
    cdef int *edge_dst
    cdef char *seen
    cdef int *stack

    compiled = True

    def __cinit__(self, int num_vars, lits, starts, lo, hi, reif):
        cdef int m = len(lo)
        cdef int n_lits = len(lits)
        cdef int c, k, v, r, total
        self.num_vars = num_vars
        self.num_cons = m
        self.lits = <int *>malloc(max(n_lits, 1) * sizeof(int))
        self.starts = <int *>malloc((m + 1) * sizeof(int))
        self.lo = <int *>malloc(max(m, 1) * sizeof(int))
        self.hi = <int *>malloc(max(m, 1) * sizeof(int))
        self.reif = <int *>malloc(max(m, 1) * sizeof(int))
        self.values = <signed char *>malloc((num_vars + 1) * sizeof(signed char))
        self.trail = <int *>malloc((num_vars + 1) * sizeof(int))
        self.occ_start = <int *>malloc((num_vars + 2) * sizeof(int))
        if not (self.lits and self.starts and self.lo and self.hi and self.reif
                and self.values and self.trail and self.occ_start):
            raise MemoryError()
        for k in range(n_lits):
            self.lits[k] = lits[k]
        for c in range(m + 1):
            self.starts[c] = starts[c]
        for c in range(m):
            self.lo[c] = lo[c]
            self.hi[c] = hi[c]
            self.reif[c] = reif[c]
        for v in range(num_vars + 1):
            self.values[v] = 0
        self.num_nodes = 0
        self.exist_vars = NULL
        self.edge_start = NULL
        self.edge_var = NULL
        self.edge_dst = NULL
        self.seen = NULL
        self.stack = NULL
        self.trail_len = 0
        self.qhead = 0
        self.propagations = 0

        # occurrence lists (CSR), one entry per distinct var per constraint
        occurs = [[] for _ in range(num_vars + 1)]
        for c in range(m):
            seen = set()
            for k in range(self.starts[c], self.starts[c + 1]):
                v = abs(self.lits[k])
                if v not in seen:
                    occurs[v].append(c)
                    seen.add(v)
            r = abs(self.reif[c])
            if r and r not in seen:
                occurs[r].append(c)
        total = sum(len(o) for o in occurs)
        self.occ = <int *>malloc(max(total, 1) * sizeof(int))
        if not self.occ:
            raise MemoryError()
        k = 0
        for v in range(num_vars + 1):
            self.occ_start[v] = k
            for c in occurs[v]:
                self.occ[k] = c
                k += 1
        self.occ_start[num_vars + 1] = k

    def __dealloc__(self):
        free(self.lits)
        free(self.starts)
        free(self.lo)
        free(self.hi)
        free(self.reif)
        free(self.values)
        free(self.trail)
        free(self.occ_start)
        free(self.occ)
        self._free_graph()

    cdef void _free_graph(self):
        free(self.exist_vars)
        free(self.edge_start)
        free(self.edge_var)
        free(self.edge_dst)
        free(self.seen)
        free(self.stack)
        self.exist_vars = NULL
        self.edge_start = NULL
        self.edge_var = NULL
        self.edge_dst = NULL
        self.seen = NULL
        self.stack = NULL

    cpdef int value(self, int var):
        return self.values[var]

    cpdef int trail_size(self):
        return self.trail_len

    cdef inline int _lit_value(self, int lit) nogil:
        if lit > 0:
            return self.values[lit]
        return -self.values[-lit]

    cdef inline bint _set(self, int lit) nogil:
        cdef int v = lit if lit > 0 else -lit
        cdef signed char want = 1 if lit > 0 else -1
        cdef signed char cur = self.values[v]
        if cur == want:
            return True
        if cur == -want:
            return False
        self.values[v] = want
        self.trail[self.trail_len] = v
        self.trail_len += 1
        return True

    cpdef bint assign(self, int lit):
        if not self._set(lit):
            return False
        return self._propagate()

    def propagate(self):
        return self._propagate()

    def propagate_all(self):
        cdef int c
        for c in range(self.num_cons):
            if not self._check(c):
                return False
        return self._propagate()

    cdef bint _propagate(self):
        cdef int v, k
        while self.qhead < self.trail_len:
            v = self.trail[self.qhead]
            self.qhead += 1
            for k in range(self.occ_start[v], self.occ_start[v + 1]):
                if not self._check(self.occ[k]):
                    return False
        return True

    cdef bint _fill(self, int start, int end, int sign) nogil:
        cdef int k, l, v
        for k in range(start, end):
            l = self.lits[k]
            v = l if l > 0 else -l
            if self.values[v] == 0:
                self.propagations += 1
                if not self._set(l if sign > 0 else -l):
                    return False
        return True

    cdef bint _check(self, int c) nogil:
        cdef int start = self.starts[c]
        cdef int end = self.starts[c + 1]
        cdef int t = 0, u = 0, k, val, rv
        cdef int lo = self.lo[c], hi = self.hi[c], r = self.reif[c]
        for k in range(start, end):
            val = self._lit_value(self.lits[k])
            if val > 0:
                t += 1
            elif val == 0:
                u += 1
        if r == 0:
            rv = 1
        else:
            rv = self._lit_value(r)
        if rv == 0:
            if lo <= t and t + u <= hi:
                self.propagations += 1
                return self._set(r)
            if t > hi or t + u < lo:
                self.propagations += 1
                return self._set(-r)
            return True
        if rv > 0:
            if t > hi or t + u < lo:
                return False
            if u == 0:
                return True
            if t == hi:
                return self._fill(start, end, -1)
            if t + u == lo:
                return self._fill(start, end, 1)
            return True
        if lo <= t and t + u <= hi:
            return False
        if u == 0:
            return True
        if lo <= t:
            if t + u == hi + 1:
                return self._fill(start, end, 1)
        elif t + u <= hi:
            if t == lo - 1:
                return self._fill(start, end, -1)
        return True

    cpdef undo(self, int size):
        while self.trail_len > size:
            self.trail_len -= 1
            self.values[self.trail[self.trail_len]] = 0
        self.qhead = size

    # -- wiring graph

    def set_graph(self, int num_nodes, exist_vars, wire_vars, wire_src, wire_dst):
        cdef int n_edges = len(wire_vars)
        cdef int k, a, pos
        self._free_graph()
        self.num_nodes = num_nodes
        self.exist_vars = <int *>malloc(max(num_nodes, 1) * sizeof(int))
        self.edge_start = <int *>malloc((num_nodes + 1) * sizeof(int))
        self.edge_var = <int *>malloc(max(n_edges, 1) * sizeof(int))
        self.edge_dst = <int *>malloc(max(n_edges, 1) * sizeof(int))
        self.seen = <char *>malloc(max(num_nodes, 1) * sizeof(char))
        self.stack = <int *>malloc(max(num_nodes, 1) * sizeof(int))
        if not (self.exist_vars and self.edge_start and self.edge_var and self.edge_dst
                and self.seen and self.stack):
            raise MemoryError()
        for k in range(num_nodes):
            self.exist_vars[k] = exist_vars[k]
        by_src = [[] for _ in range(num_nodes)]
        for k in range(n_edges):
            by_src[wire_src[k]].append((wire_vars[k], wire_dst[k]))
        pos = 0
        for a in range(num_nodes):
            self.edge_start[a] = pos
            for v, b in by_src[a]:
                self.edge_var[pos] = v
                self.edge_dst[pos] = b
                pos += 1
        self.edge_start[num_nodes] = pos

    cdef void _reach_from(self, int source, bint include_open) nogil:
        cdef int top = 0, a, b, k, val
        for k in range(self.num_nodes):
            self.seen[k] = 0
        self.seen[source] = 1
        self.stack[top] = source
        top += 1
        while top > 0:
            top -= 1
            a = self.stack[top]
            for k in range(self.edge_start[a], self.edge_start[a + 1]):
                b = self.edge_dst[k]
                if self.seen[b]:
                    continue
                val = self.values[self.edge_var[k]]
                if val > 0 or (include_open and val == 0):
                    self.seen[b] = 1
                    self.stack[top] = b
                    top += 1

    def reaches(self, int source, int target, bint include_open):
        self._reach_from(source, include_open)
        return bool(self.seen[target])

    def all_reach(self, sources, sinks):
        cdef int s, t
        cdef list live_sinks = [t for t in sinks if self.values[self.exist_vars[t]] > 0]
        if not live_sinks:
            return True
        for s in sources:
            if self.values[self.exist_vars[s]] <= 0:
                continue
            self._reach_from(s, True)
            for t in live_sinks:
                if not self.seen[t]:
                    return False
        return True

    def values_of(self, vars):
        return [self.values[v] for v in vars]
