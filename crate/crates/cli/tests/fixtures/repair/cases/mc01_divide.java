package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void divideCatch() {
        Calc calc = new Calc();
        try {
            calc.divide(1, 0);
        } catch (IllegalStateException e) {
            fail("unexpected");
        }
    }
}
