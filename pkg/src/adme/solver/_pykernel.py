"""Pure-Python propagation engine (fallback for the compiled ``_kernel``).

Both engines implement the same contract over reified cardinality
constraints ``reif <-> lo <= sum(lits) <= hi``; ``reif == 0`` means the
constraint is always enforced.  Values are 1 (true), -1 (false), 0 (unset).
"""


class Engine:
    compiled = False

    def __init__(self, num_vars, lits, starts, lo, hi, reif):
        self.num_vars = num_vars
        self.lits = list(lits)
        self.starts = list(starts)
        self.lo = list(lo)
        self.hi = list(hi)
        self.reif = list(reif)
        self.values = [0] * (num_vars + 1)
        self.trail = []
        self.qhead = 0
        self.propagations = 0
        occurs = [[] for _ in range(num_vars + 1)]
        for c in range(len(self.lo)):
            seen = set()
            for k in range(self.starts[c], self.starts[c + 1]):
                v = abs(self.lits[k])
                if v not in seen:
                    occurs[v].append(c)
                    seen.add(v)
            r = abs(self.reif[c])
            if r and r not in seen:
                occurs[r].append(c)
        self.occurs = occurs

    def value(self, var):
        return self.values[var]

    def trail_size(self):
        return len(self.trail)

    def _set(self, lit):
        """Make *lit* true; False if it is already false."""
        v = lit if lit > 0 else -lit
        want = 1 if lit > 0 else -1
        cur = self.values[v]
        if cur == want:
            return True
        if cur == -want:
            return False
        self.values[v] = want
        self.trail.append(v)
        return True

    def assign(self, lit):
        """Assert *lit* and propagate to fixpoint.  False on conflict."""
        if not self._set(lit):
            return False
        return self.propagate()

    def propagate_all(self):
        for c in range(len(self.lo)):
            if not self._check(c):
                return False
        return self.propagate()

    def propagate(self):
        values = self.values
        trail = self.trail
        while self.qhead < len(trail):
            v = trail[self.qhead]
            self.qhead += 1
            for c in self.occurs[v]:
                if not self._check(c):
                    return False
        return True

    def _check(self, c):
        values = self.values
        lits = self.lits
        start, end = self.starts[c], self.starts[c + 1]
        t = u = 0
        for k in range(start, end):
            l = lits[k]
            val = values[l] if l > 0 else -values[-l]
            if val > 0:
                t += 1
            elif val == 0:
                u += 1
        lo, hi = self.lo[c], self.hi[c]
        r = self.reif[c]
        if r == 0:
            rv = 1
        else:
            rv = values[r] if r > 0 else -values[-r]
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
        # reif false: the sum must leave [lo, hi]
        if lo <= t and t + u <= hi:
            return False
        if u == 0:
            return True
        if lo <= t:
            # only the upper side can still be left
            if t + u == hi + 1:
                return self._fill(start, end, 1)
        elif t + u <= hi:
            if t == lo - 1:
                return self._fill(start, end, -1)
        return True

    def _fill(self, start, end, sign):
        """Set every unassigned literal in the range to *sign*."""
        values = self.values
        lits = self.lits
        for k in range(start, end):
            l = lits[k]
            v = l if l > 0 else -l
            if values[v] == 0:
                self.propagations += 1
                if not self._set(l if sign > 0 else -l):
                    return False
        return True

    def undo(self, size):
        values = self.values
        trail = self.trail
        while len(trail) > size:
            values[trail.pop()] = 0
        self.qhead = size

    # -- wiring graph

    def set_graph(self, num_nodes, exist_vars, wire_vars, wire_src, wire_dst):
        """Register the candidate graph used by the reachability checks."""
        self.num_nodes = num_nodes
        self.exist_vars = list(exist_vars)
        out = [[] for _ in range(num_nodes)]
        for v, a, b in zip(wire_vars, wire_src, wire_dst):
            out[a].append((v, b))
        self.out_edges = out

    def reaches(self, source, target, include_open):
        return bool(self._reached(source, include_open) >> target & 1)

    def _reached(self, source, include_open):
        """Bitmask of nodes reachable from *source* over true (and open) wires."""
        values = self.values
        out = self.out_edges
        mask = 1 << source
        stack = [source]
        while stack:
            for v, b in out[stack.pop()]:
                if not mask >> b & 1:
                    val = values[v]
                    if val > 0 or (include_open and val == 0):
                        mask |= 1 << b
                        stack.append(b)
        return mask

    def all_reach(self, sources, sinks):
        """False if an existing source cannot reach an existing sink even
        through undecided wires."""
        values = self.values
        ex = self.exist_vars
        need = 0
        for t in sinks:
            if values[ex[t]] > 0:
                need |= 1 << t
        if not need:
            return True
        for s in sources:
            if values[ex[s]] > 0 and need & ~self._reached(s, True):
                return False
        return True

    def values_of(self, vars):
        values = self.values
        return [values[v] for v in vars]
