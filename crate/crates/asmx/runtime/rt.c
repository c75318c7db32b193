/* Minimal freestanding runtime: syscalls, output, string helpers and the
 * ARM EABI division routines clang emits calls to at -O0. */
#include "asmx_test.h"

long asmx_syscall(long nr, long a, long b, long c);

#if defined(__arm__)
#define SYS_WRITE 4
#define SYS_GETPID 20
#define SYS_KILL 37
#define SYS_EXIT 1
#else
#define SYS_WRITE 64
#define SYS_GETPID 172
#define SYS_KILL 129
#define SYS_EXIT 93
#endif

asmx_size_t asmx_strlen(const char *s)
{
	asmx_size_t n = 0;
	while (s[n])
		n++;
	return n;
}

void asmx_write(int fd, const char *buf, asmx_size_t len)
{
	asmx_syscall(SYS_WRITE, fd, (long)buf, (long)len);
}

void asmx_puts(const char *s)
{
	asmx_write(1, s, asmx_strlen(s));
}

void asmx_put_long(long v)
{
	char buf[24];
	int i = 23;
	unsigned long u = v < 0 ? 0ul - (unsigned long)v : (unsigned long)v;
	buf[i] = 0;
	do {
		unsigned long q = 0, r = 0;
		/* base-10 by repeated subtraction keeps this free of libcalls */
		for (int bit = 63; bit >= 0; bit--) {
			if (bit >= (int)(8 * sizeof(unsigned long)))
				continue;
			r = (r << 1) | ((u >> bit) & 1);
			if (r >= 10) {
				r -= 10;
				q |= 1ul << bit;
			}
		}
		buf[--i] = (char)('0' + r);
		u = q;
	} while (u);
	if (v < 0)
		buf[--i] = '-';
	asmx_puts(buf + i);
}

void asmx_raise(int sig)
{
	asmx_syscall(SYS_KILL, asmx_syscall(SYS_GETPID, 0, 0, 0), sig, 0);
}

void *memcpy(void *dst, const void *src, asmx_size_t n)
{
	unsigned char *d = dst;
	const unsigned char *s = src;
	while (n--)
		*d++ = *s++;
	return dst;
}

void *memmove(void *dst, const void *src, asmx_size_t n)
{
	unsigned char *d = dst;
	const unsigned char *s = src;
	if (d < s) {
		while (n--)
			*d++ = *s++;
	} else {
		while (n--)
			d[n] = s[n];
	}
	return dst;
}

void *memset(void *dst, int c, asmx_size_t n)
{
	unsigned char *d = dst;
	while (n--)
		*d++ = (unsigned char)c;
	return dst;
}

#if defined(__arm__)
static unsigned udivmod(unsigned n, unsigned d, unsigned *rem)
{
	unsigned q = 0, r = 0;
	if (d == 0) {
		asmx_raise(8);
		return 0;
	}
	for (int bit = 31; bit >= 0; bit--) {
		r = (r << 1) | ((n >> bit) & 1);
		if (r >= d) {
			r -= d;
			q |= 1u << bit;
		}
	}
	*rem = r;
	return q;
}

unsigned __aeabi_uidiv(unsigned n, unsigned d)
{
	unsigned r;
	return udivmod(n, d, &r);
}

int __aeabi_idiv(int n, int d)
{
	unsigned r;
	unsigned un = n < 0 ? 0u - (unsigned)n : (unsigned)n;
	unsigned ud = d < 0 ? 0u - (unsigned)d : (unsigned)d;
	unsigned q = udivmod(un, ud, &r);
	return (n < 0) != (d < 0) ? -(int)q : (int)q;
}

/* quotient in r0, remainder in r1 */
unsigned long long __aeabi_uidivmod(unsigned n, unsigned d)
{
	unsigned r = 0;
	unsigned q = udivmod(n, d, &r);
	return (unsigned long long)r << 32 | q;
}

unsigned long long __aeabi_idivmod(int n, int d)
{
	unsigned r = 0;
	unsigned un = n < 0 ? 0u - (unsigned)n : (unsigned)n;
	unsigned ud = d < 0 ? 0u - (unsigned)d : (unsigned)d;
	unsigned q = udivmod(un, ud, &r);
	int sq = (n < 0) != (d < 0) ? -(int)q : (int)q;
	int sr = n < 0 ? -(int)r : (int)r;
	return (unsigned long long)(unsigned)sr << 32 | (unsigned)sq;
}
#endif
