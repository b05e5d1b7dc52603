package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void signOfOne() {
        Calc calc = new Calc();
        assertNull(calc.sign(1));
    }
}
